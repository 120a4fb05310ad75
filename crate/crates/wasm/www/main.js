import init, { sdr_curve, filter_function, echo_decays } from "./pkg/sdr_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

function columns(flat, count) {
  const n = flat.length / count;
  return Array.from({ length: count }, (_, k) => flat.subarray(k * n, (k + 1) * n));
}

function plot(canvasId, legendId, x, series, { logX = false, xLabel = "" } = {}) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 48;
  ctx.clearRect(0, 0, w, h);
  const fx = logX ? Math.log10 : (v) => v;
  const xs = Array.from(x, fx);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = Infinity, y1 = -Infinity;
  for (const s of series) for (const v of s.y) { if (Number.isFinite(v)) { y0 = Math.min(y0, v); y1 = Math.max(y1, v); } }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const px = (v) => pad + ((v - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (v) => h - pad - ((v - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "12px system-ui";
  for (let i = 0; i <= 4; i++) {
    const yv = y0 + (i / 4) * (y1 - y0);
    ctx.fillText(yv.toPrecision(3), 4, py(yv) + 4);
    const xv = x0 + (i / 4) * (x1 - x0);
    ctx.fillText((logX ? 10 ** xv : xv).toPrecision(3), px(xv) - 14, h - pad + 16);
  }
  ctx.fillText(xLabel, w / 2 - 30, h - 8);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo(px(xs[i]), py(v)) : ctx.moveTo(px(xs[i]), py(v))));
    ctx.stroke();
  });
  document.getElementById(legendId).innerHTML = series
    .map((s, k) => `<span style="color:${COLORS[k % COLORS.length]}">■ ${s.name}</span>`)
    .join("");
}

function read() {
  const num = (id) => parseFloat(document.getElementById(id).value);
  return {
    kind: document.getElementById("kind").value,
    d: num("diameter"),
    d0: num("d0"),
    g: num("gradient"),
    te: num("te"),
    n: Math.round(num("n")),
    x: num("x"),
    modes: parseInt(document.getElementById("modes").value, 10),
  };
}

function update() {
  const p = read();
  const error = document.getElementById("error");
  error.textContent = "";
  try {
    const [x, total, cpmg, hahn, cross] = columns(sdr_curve(p.kind, p.d, p.d0, p.g, p.te, p.n, 80, p.modes), 5);
    plot("scan", "scan-legend", x, [
      { name: "M_SDR", y: total },
      { name: "CPMG block", y: cpmg },
      { name: "Hahn block", y: hahn },
      { name: "cross factor", y: cross },
    ], { logX: true, xLabel: "x (ms)" });

    const [w, f2, fc, fh, fx, s] = columns(filter_function(p.kind, p.d, p.d0, p.n, p.x, p.te, 600), 6);
    const peak = Math.max(...f2);
    const scale = (a) => Array.from(a, (v) => v / peak);
    plot("filter", "filter-legend", w, [
      { name: "|F|²", y: scale(f2) },
      { name: "|F_CPMG|²", y: scale(fc) },
      { name: "|F_Hahn|²", y: scale(fh) },
      { name: "interference", y: scale(fx) },
      { name: "S(ω)/S(0)", y: s },
    ], { xLabel: "ω (rad/s)" });

    const [te, mh, mc] = columns(echo_decays(p.kind, p.d, p.d0, p.g, p.n, 120, 60, p.modes), 3);
    plot("echo", "echo-legend", te, [
      { name: "Hahn", y: mh },
      { name: `CPMG-${p.n}`, y: mc },
    ], { xLabel: "TE (ms)" });
  } catch (e) {
    error.textContent = String(e);
  }
}

await init();
document.querySelectorAll("#params input, #params select").forEach((el) => el.addEventListener("input", update));
update();
