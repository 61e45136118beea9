import init, { channel_gain_db, sweep_json, optl_trace } from "./pkg/mbprecode_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
const num = (id) => Number(document.getElementById(id).value);

function report(id, fn) {
  const msg = document.getElementById(id);
  msg.textContent = "";
  msg.className = "";
  try {
    fn(msg);
  } catch (e) {
    msg.textContent = String(e.message ?? e);
    msg.className = "err";
  }
}

function drawHeatmap() {
  report("hm-msg", (msg) => {
    const side = num("hm-side");
    const gains = channel_gain_db(side, num("hm-spacing"), num("hm-half"));
    const n = side * side;
    const canvas = document.getElementById("hm-canvas");
    const ctx = canvas.getContext("2d");
    const cell = canvas.width / n;
    const floor = -40;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    for (let k = 0; k < n; k++) {
      for (let j = 0; j < n; j++) {
        const t = Math.min(1, Math.max(0, (gains[k * n + j] - floor) / -floor));
        ctx.fillStyle = `hsl(${240 - 240 * t}, 80%, ${20 + 45 * t}%)`;
        ctx.fillRect(j * cell, k * cell, cell, cell);
      }
    }
    msg.textContent = `${n} users x ${n} feeds, colour scale ${floor} dB to 0 dB`;
  });
}

function axes(ctx, w, h, pad, xr, yr, xlabel, ylabel) {
  ctx.strokeStyle = "#444";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillText(`${xr[0].toPrecision(3)}`, pad, h - pad + 16);
  ctx.fillText(`${xr[1].toPrecision(3)}`, w - pad - 24, h - pad + 16);
  ctx.fillText(`${yr[1].toPrecision(4)}`, 4, pad + 4);
  ctx.fillText(`${yr[0].toPrecision(4)}`, 4, h - pad);
  ctx.fillText(xlabel, w / 2 - 30, h - 6);
  ctx.fillText(ylabel, pad + 6, pad - 8);
}

function plot(canvas, series, xlabel, ylabel, logY = false) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 48;
  ctx.clearRect(0, 0, w, h);
  const tf = (y) => (logY ? Math.log10(Math.max(y, 1e-300)) : y);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y.map(tf));
  const xr = [Math.min(...xs), Math.max(...xs)];
  const yr = [Math.min(...ys), Math.max(...ys)];
  if (xr[0] === xr[1]) xr[1] += 1;
  if (yr[0] === yr[1]) yr[1] += 1;
  const px = (x) => pad + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 2 * pad);
  const py = (y) => h - pad - ((tf(y) - yr[0]) / (yr[1] - yr[0])) * (h - 2 * pad);
  axes(ctx, w, h, pad, xr, logY ? yr.map((v) => 10 ** v) : yr, xlabel, ylabel);
  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.x.forEach((x, j) => (j ? ctx.lineTo(px(x), py(s.y[j])) : ctx.moveTo(px(x), py(s.y[j]))));
    ctx.stroke();
  });
}

function runSweep() {
  report("sw-msg", (msg) => {
    const started = performance.now();
    const curves = JSON.parse(sweep_json(num("sw-side"), 0.8, num("sw-min"), num("sw-max"), num("sw-step")));
    const series = curves.map((c) => ({
      name: c.scheme,
      x: c.points.map((p) => p.psat_dbw),
      y: c.points.map((p) => p.system_throughput_mbps),
    }));
    plot(document.getElementById("sw-canvas"), series, "Psat (dBW)", "system throughput (Mbps)");
    document.getElementById("sw-legend").innerHTML = series
      .map((s, i) => `<span style="color:${COLORS[i % COLORS.length]}">&#9632; ${s.name}</span>`)
      .join("");
    msg.textContent = `${curves.length} schemes in ${(performance.now() - started).toFixed(0)} ms`;
  });
}

function runOptl() {
  report("op-msg", (msg) => {
    const seed = BigInt(Math.max(0, Math.floor(num("op-seed"))));
    const trace = JSON.parse(optl_trace(num("op-users"), num("op-coupling"), num("op-target"), seed));
    const x = trace.residuals.map((_, i) => i + 1);
    plot(document.getElementById("op-canvas"), [{ name: "residual", x, y: trace.residuals }], "iteration", "residual (log)", true);
    msg.textContent = `${trace.converged ? "converged" : "stopped"} after ${trace.iterations} iterations, total power ${trace.total_power.toPrecision(5)}`;
  });
}

await init();
document.getElementById("hm-run").onclick = drawHeatmap;
document.getElementById("sw-run").onclick = runSweep;
document.getElementById("op-run").onclick = runOptl;
drawHeatmap();
runOptl();
