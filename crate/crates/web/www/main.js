import init, { summarizePlanted, projectCappedSimplex, segmentSignal } from "./pkg/vpsumm_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function fail(el, e) {
  el.className = "err";
  el.textContent = String(e);
}

function drawPoints(result) {
  const c = $("plot").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  const map = ([x, y]) => [w / 2 + x * (w / 2 - 20), h / 2 - y * (h / 2 - 20)];
  c.strokeStyle = "#eee";
  c.beginPath(); c.moveTo(0, h / 2); c.lineTo(w, h / 2); c.moveTo(w / 2, 0); c.lineTo(w / 2, h); c.stroke();
  for (const v of result.videos) {
    const color = COLORS[v.group % COLORS.length];
    v.points.forEach((p, t) => {
      const [x, y] = map(p);
      c.fillStyle = color;
      c.strokeStyle = color;
      c.beginPath();
      c.arc(x, y, v.selected.includes(t) ? 6 : 2.5, 0, 2 * Math.PI);
      c.fill();
      if (v.planted.includes(t)) {
        c.beginPath(); c.arc(x, y, 10, 0, 2 * Math.PI); c.stroke();
      }
    });
  }
}

function drawHistory(result) {
  const c = $("history").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  const ys = result.objective_history;
  const lo = Math.min(...ys, result.oracle_objective ?? Infinity);
  const hi = Math.max(...ys);
  const span = hi - lo || 1;
  const px = (i) => 20 + (i / Math.max(ys.length - 1, 1)) * (w - 40);
  const py = (v) => h - 20 - ((v - lo) / span) * (h - 40);
  c.strokeStyle = "#333";
  c.beginPath();
  ys.forEach((v, i) => (i ? c.lineTo(px(i), py(v)) : c.moveTo(px(i), py(v))));
  c.stroke();
  if (result.oracle_objective != null) {
    c.strokeStyle = "#d62728";
    c.setLineDash([4, 4]);
    c.beginPath(); c.moveTo(20, py(result.oracle_objective)); c.lineTo(w - 20, py(result.oracle_objective)); c.stroke();
    c.setLineDash([]);
  }
  c.fillStyle = "#333";
  c.fillText("relaxed objective per outer step (dashed: exact optimum)", 20, 14);
}

function runSummarize() {
  const out = $("summary");
  out.className = "";
  try {
    const r = JSON.parse(summarizePlanted(
      num("groups"), num("vpg"), num("clips"), num("s"), num("sep"), num("noise"),
      num("l1"), num("l2"), num("l3"), num("seed"),
    ));
    drawPoints(r);
    drawHistory(r);
    const lines = r.videos.map((v) => `${v.id}: selected [${v.selected}] planted [${v.planted}]`);
    lines.push(`rounded objective ${r.rounded_objective.toFixed(6)}`);
    if (r.oracle_objective != null) lines.push(`exact optimum     ${r.oracle_objective.toFixed(6)}`);
    lines.push(`planted precision ${r.precision.toFixed(3)}`);
    out.textContent = lines.join("\n");
  } catch (e) {
    fail(out, e);
  }
}

function runProject() {
  const out = $("projout");
  out.className = "";
  try {
    const v = new Float64Array($("pv").value.split(/[\s,]+/).filter(Boolean).map(Number));
    const z = projectCappedSimplex(v, num("ps"));
    out.textContent = `[${Array.from(z, (x) => x.toFixed(6)).join(", ")}]  sum = ${z.reduce((a, b) => a + b, 0).toFixed(9)}`;
  } catch (e) {
    fail(out, e);
  }
}

function runSegment() {
  const out = $("segout");
  out.className = "";
  try {
    const frames = num("frames");
    const cut = num("cut");
    const signal = new Float64Array(frames - 1);
    for (let i = 0; i < signal.length; i++) signal[i] = (i + 1) % cut === 0 ? 0.9 : 0.1 * Math.random();
    const clips = JSON.parse(segmentSignal(signal, num("thr")));
    const c = $("segplot").getContext("2d");
    const { width: w, height: h } = c.canvas;
    c.clearRect(0, 0, w, h);
    clips.forEach(([a, b], i) => {
      c.fillStyle = COLORS[i % COLORS.length];
      c.fillRect((a / frames) * w, 10, ((b - a) / frames) * w - 1, h - 20);
    });
    out.textContent = clips.map(([a, b]) => `[${a}, ${b}) len ${b - a}`).join("\n");
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("run").onclick = runSummarize;
$("proj").onclick = runProject;
$("seg").onclick = runSegment;
runSummarize();
runProject();
runSegment();
