/* tslint:disable */
/* eslint-disable */

/**
 * Euclidean projection onto `{z : Σz = s, 0 ≤ z ≤ 1}`.
 */
export function projectCappedSimplex(values: Float64Array, s: number): Float64Array;

/**
 * Clip ranges `[[start, end], ...]` as JSON for a frame-difference signal.
 */
export function segmentSignal(fractions: Float64Array, threshold: number): string;

/**
 * Generates a planted corpus, summarizes it and returns the result as JSON.
 */
export function summarizePlanted(n_groups: number, videos_per_group: number, clips_per_video: number, s: number, separation: number, noise_sigma: number, lambda1: number, lambda2: number, lambda3: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly projectCappedSimplex: (a: number, b: number, c: number) => [number, number, number, number];
    readonly segmentSignal: (a: number, b: number, c: number) => [number, number, number, number];
    readonly summarizePlanted: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
