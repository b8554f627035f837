import init, {
  cantor_cells, cantor_dimension, product_cells, projection_histogram, tube,
} from "./pkg/frostlab_demo.js";

// product measure shown in the last two panels
const LEVEL = 8, S1 = 0.6, S2 = 0.6, SEED = 7;
const N = 1 << LEVEL;

const $ = (id) => document.getElementById(id);

function bindLabel(input) {
  const span = input.parentElement.querySelector("span");
  const show = () => { if (span) span.textContent = input.value; };
  input.addEventListener("input", show);
  show();
}

function drawCantor() {
  const level = +$("c-level").value, s = +$("c-s").value, seed = +$("c-seed").value;
  const cv = $("c-canvas"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  try {
    const cells = cantor_cells(level, s, seed);
    const w = cv.width / (1 << level);
    g.fillStyle = "#234";
    for (const c of cells) g.fillRect(c * w, 10, Math.max(w, 1), 40);
    const dim = cantor_dimension(level, s, seed);
    $("c-out").textContent = `${cells.length} cells, fitted dimension ${dim.toFixed(3)}`;
  } catch (e) {
    $("c-out").textContent = String(e);
  }
}

function drawSquare(g, size, cells) {
  g.clearRect(0, 0, size, size);
  const w = size / N;
  g.fillStyle = "#234";
  for (let k = 0; k < cells.length; k += 2) {
    g.fillRect(cells[k] * w, size - (cells[k + 1] + 1) * w, Math.max(w, 1), Math.max(w, 1));
  }
}

let square;

function drawProjection() {
  const angle = +$("p-angle").value;
  const cv = $("p-canvas"), g = cv.getContext("2d"), size = cv.width;
  drawSquare(g, size, square);
  g.strokeStyle = "#c33";
  g.beginPath();
  const cx = size / 2, cy = size / 2, r = size;
  g.moveTo(cx - r * Math.cos(angle), cy + r * Math.sin(angle));
  g.lineTo(cx + r * Math.cos(angle), cy - r * Math.sin(angle));
  g.stroke();

  const h = projection_histogram(LEVEL, S1, S2, SEED, angle);
  const [start, delta] = h;
  const bins = h.slice(2);
  const hc = $("p-hist"), hg = hc.getContext("2d");
  hg.clearRect(0, 0, hc.width, hc.height);
  // the projected coordinate lies in [-√2, √2]
  const scale = hc.width / (2 * Math.SQRT2);
  const peak = Math.max(...bins);
  hg.fillStyle = "#c33";
  bins.forEach((m, i) => {
    const x = (start + i * delta + Math.SQRT2) * scale;
    const hgt = (m / peak) * (hc.height - 4);
    hg.fillRect(x, hc.height - hgt, Math.max(delta * scale, 1), hgt);
  });
}

let point = [0.5, 0.5];

function drawTube() {
  const angle = +$("t-angle").value;
  const cv = $("t-canvas"), g = cv.getContext("2d"), size = cv.width;
  drawSquare(g, size, square);
  const t = tube(LEVEL, S1, S2, SEED, angle, point[0], point[1]);
  const w = size / N;
  g.fillStyle = "rgba(220, 60, 60, 0.45)";
  for (let k = 1; k < t.length; k += 2) {
    g.fillRect(t[k] * w, size - (t[k + 1] + 1) * w, w, w);
  }
  $("t-out").textContent =
    `${(t.length - 1) / 2} tube cells, mu(tube) = ${t[0].toExponential(3)}`;
}

async function main() {
  await init();
  square = product_cells(LEVEL, S1, S2, SEED);
  for (const id of ["c-level", "c-s", "p-angle", "t-angle"]) bindLabel($(id));
  for (const id of ["c-level", "c-s", "c-seed"]) $(id).addEventListener("input", drawCantor);
  $("p-angle").addEventListener("input", drawProjection);
  $("t-angle").addEventListener("input", drawTube);
  $("t-canvas").addEventListener("click", (ev) => {
    const r = ev.target.getBoundingClientRect();
    point = [(ev.clientX - r.left) / r.width, 1 - (ev.clientY - r.top) / r.height];
    drawTube();
  });
  drawCantor();
  drawProjection();
  drawTube();
  $("status").textContent = `product Cantor measure: level ${LEVEL}, dimensions ${S1} + ${S2}`;
}

main().catch((e) => { $("status").textContent = `failed to load: ${e}`; });
