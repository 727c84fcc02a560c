//! Per-video parallel sections. Every reduction happens in the caller in
//! video order, so results do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn for_each_indexed<T: Send>(items: Vec<T>, f: impl Fn(usize, T) + Sync + Send) {
    items.into_par_iter().enumerate().for_each(|(i, t)| f(i, t));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_indexed<T>(items: Vec<T>, f: impl Fn(usize, T)) {
    items.into_iter().enumerate().for_each(|(i, t)| f(i, t));
}
