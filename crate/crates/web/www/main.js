import init, { rms_curves, optimal_schedule_times, algorithm1_trace } from "./pkg/putraffic_web.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

function values(form) {
  const out = {};
  for (const el of form.elements) out[el.name] = Number(el.value);
  return out;
}

// Draw polylines on a canvas with shared linear axes.
function plot(canvas, series, { xmin, xmax, ymin, ymax }) {
  const ctx = canvas.getContext("2d");
  const pad = 40;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin)) * w;
  const sy = (y) => pad + h - ((y - ymin) / (ymax - ymin)) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(xmin.toPrecision(3), pad, pad + h + 14);
  ctx.fillText(xmax.toPrecision(3), pad + w - 24, pad + h + 14);
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, pad + h);
  series.forEach(({ xs, ys, color, dots }) => {
    ctx.strokeStyle = ctx.fillStyle = color;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
    if (dots) xs.forEach((x, i) => ctx.fillRect(sx(x) - 2, sy(ys[i]) - 2, 4, 4));
    else ctx.stroke();
  });
}

function guarded(errEl, f) {
  try {
    errEl.textContent = "";
    f();
  } catch (e) {
    errEl.textContent = String(e.message ?? e);
  }
}

function drawCurves() {
  const v = values(document.getElementById("curves"));
  guarded(document.getElementById("curves-err"), () => {
    const flat = rms_curves(v.u, v.lf, v.t, 3, Math.max(4, v.nmax));
    const stride = 5;
    const n = [], cols = [[], [], [], []];
    for (let i = 0; i < flat.length; i += stride) {
      n.push(flat[i]);
      for (let c = 0; c < 4; c++) cols[c].push(flat[i + c + 1]);
    }
    const all = cols.flat();
    const names = ["sample mean", "sample mean, optimal schedule", "optimal weights", "ML bound"];
    plot(document.getElementById("curves-plot"),
      cols.map((ys, c) => ({ xs: n, ys, color: COLORS[c] })),
      { xmin: n[0], xmax: n[n.length - 1], ymin: 0, ymax: Math.max(...all) * 1.05 });
    document.getElementById("curves-legend").innerHTML =
      names.map((s, c) => `<span style="color:${COLORS[c]}">&#9632; ${s}</span>`).join("");
  });
}

function drawSchedule() {
  const v = values(document.getElementById("schedule"));
  guarded(document.getElementById("schedule-err"), () => {
    const times = optimal_schedule_times(v.u, v.lf, v.n, v.t);
    const n = times.length / 2;
    const opt = Array.from(times.slice(0, n));
    const uni = Array.from(times.slice(n));
    plot(document.getElementById("schedule-plot"), [
      { xs: opt, ys: opt.map(() => 0.7), color: COLORS[1], dots: true },
      { xs: uni, ys: uni.map(() => 0.3), color: COLORS[0], dots: true },
    ], { xmin: 0, xmax: v.t, ymin: 0, ymax: 1 });
  });
}

function drawBlind() {
  const v = values(document.getElementById("blind"));
  guarded(document.getElementById("blind-err"), () => {
    const flat = algorithm1_trace(v.u, v.lf, v.alpha, v.t0, 5, v.nth, v.seed);
    const t = [], est = [];
    for (let i = 0; i < flat.length; i += 3) {
      t.push(flat[i]);
      est.push(flat[i + 2]);
    }
    const end = t[t.length - 1] || 1;
    plot(document.getElementById("blind-plot"), [
      { xs: t, ys: est, color: COLORS[0] },
      { xs: [0, end], ys: [v.u, v.u], color: "#999" },
    ], { xmin: 0, xmax: end, ymin: 0, ymax: 1 });
    document.getElementById("blind-summary").textContent =
      `${t.length} samples over ${end.toFixed(1)} s; final estimate ${est[est.length - 1].toFixed(4)} (true ${v.u})`;
  });
}

await init();
for (const [id, draw] of [["curves", drawCurves], ["schedule", drawSchedule], ["blind", drawBlind]]) {
  document.getElementById(id).addEventListener("input", draw);
  draw();
}
