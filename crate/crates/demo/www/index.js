import init, { csi_heatmap, msfe_filter, kan_curve, subcarriers } from "./pkg/channelkan_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = $("status");

function show(err) {
  status.textContent = err ? String(err) : "";
}

function drawHeatmap() {
  const frames = num("hm-frames");
  let h;
  try {
    h = csi_heatmap(num("hm-v"), num("hm-snr"), num("hm-seed"), frames);
  } catch (e) {
    return show(e);
  }
  show();
  const k = subcarriers();
  const c = $("hm");
  const ctx = c.getContext("2d");
  const img = ctx.createImageData(c.width, c.height);
  const max = Math.max(...h) || 1;
  for (let y = 0; y < c.height; y++) {
    const sc = Math.floor((y * k) / c.height);
    for (let x = 0; x < c.width; x++) {
      const t = Math.floor((x * frames) / c.width);
      const v = h[t * k + sc] / max;
      const i = 4 * (y * c.width + x);
      img.data[i] = 255 * Math.min(1, 2 * v);
      img.data[i + 1] = 255 * Math.max(0, 2 * v - 1);
      img.data[i + 2] = 255 * (1 - v) * 0.6;
      img.data[i + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function plot(canvas, series, colors) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const all = series.flat();
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const span = hi - lo || 1;
  series.forEach((s, j) => {
    ctx.strokeStyle = colors[j];
    ctx.lineWidth = j === 0 ? 1 : 2;
    ctx.beginPath();
    s.forEach((v, i) => {
      const x = (i / (s.length - 1)) * canvas.width;
      const y = canvas.height - ((v - lo) / span) * (canvas.height - 10) - 5;
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
}

function drawFilter() {
  const frames = 64;
  $("sf-rank-val").textContent = $("sf-rank").value;
  let out;
  try {
    out = msfe_filter(num("sf-v"), num("sf-snr"), num("sf-seed"), frames, num("sf-rank"), 0);
  } catch (e) {
    return show(e);
  }
  show();
  const parts = [0, 1, 2].map((j) => Array.from(out.slice(j * frames, (j + 1) * frames)));
  plot($("sf"), parts, ["#bbb", "#c33", "#236"]);
}

function drawKan() {
  const coeffs = $("kan-c").value.split(",").map(Number);
  let y;
  try {
    y = kan_curve(new Float64Array(coeffs), num("kan-s"), 6, 200);
  } catch (e) {
    return show(e);
  }
  show();
  plot($("kan"), [Array.from(y)], ["#236"]);
}

await init();
show();
$("hm-go").addEventListener("click", drawHeatmap);
for (const id of ["sf-v", "sf-snr", "sf-seed", "sf-rank"]) $(id).addEventListener("input", drawFilter);
for (const id of ["kan-c", "kan-s"]) $(id).addEventListener("input", drawKan);
drawHeatmap();
drawFilter();
drawKan();
