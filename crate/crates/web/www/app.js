import init, { discretize_target, AnnealDemo, compare_with_planner } from "./pkg/tripmix_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Bars for each series side by side in every bin.
function bars(canvas, series, colors) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const n = series[0].length;
  const top = Math.max(1e-12, ...series.flat());
  const slot = w / n;
  const bw = slot / series.length;
  series.forEach((s, k) => {
    g.fillStyle = colors[k];
    s.forEach((v, i) => {
      const bh = (v / top) * (h - 4);
      g.fillRect(i * slot + k * bw, h - bh, Math.max(1, bw - 0.5), bh);
    });
  });
}

function curve(canvas, points) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  if (points.length < 2) return;
  const top = Math.max(...points.map((p) => p[1]));
  const last = points[points.length - 1][0] || 1;
  g.strokeStyle = "#333";
  g.beginPath();
  points.forEach(([x, y], i) => {
    const px = (x / last) * (w - 2) + 1;
    const py = h - 2 - (y / top) * (h - 6);
    i ? g.lineTo(px, py) : g.moveTo(px, py);
  });
  g.stroke();
}

function guard(msg, f) {
  return () => {
    $(msg).textContent = "";
    try {
      f();
    } catch (e) {
      $(msg).textContent = String(e);
    }
  };
}

function setupTargets() {
  const ranges = { beta: [0, 1], poisson: [0, 0], gaussian: [0, 3600] };
  const draw = guard("t-msg", () => {
    const kind = $("t-kind").value;
    const bins = num("t-bins");
    const [lo, hi] = kind === "poisson" ? [0, bins] : ranges[kind];
    const masses = discretize_target(kind, num("t-a"), num("t-b"), lo, hi, bins);
    bars($("t-plot"), [Array.from(masses)], ["#47c"]);
  });
  $("t-kind").onchange = () => {
    const defaults = { beta: [0.26, 0.24], poisson: [6, 0], gaussian: [900, 300] };
    [$("t-a").value, $("t-b").value] = defaults[$("t-kind").value];
    draw();
  };
  $("t-go").onclick = draw;
  draw();
}

function setupAnnealing() {
  let demo = null;
  let running = false;
  let errors = [];
  const render = () => {
    if (!demo) return;
    const tag = $("a-char").value;
    bars($("a-hist"), [Array.from(demo.histogram(tag)), Array.from(demo.target(tag))], ["#4a7", "#c44"]);
    curve($("a-curve"), errors);
    $("a-status").textContent =
      `${demo.demands()} demands, iteration ${demo.iteration()}, ` +
      `error ${demo.error().toFixed(4)}, best ${demo.best_error().toFixed(4)}, ` +
      `temperature ${demo.temperature().toExponential(2)}`;
  };
  const tick = guard("a-msg", () => {
    if (!running || !demo) return;
    demo.step(2000);
    errors.push([demo.iteration(), demo.error()]);
    render();
    requestAnimationFrame(tick);
  });
  $("a-new").onclick = guard("a-msg", () => {
    running = false;
    if (demo) demo.free();
    $("a-status").textContent = "building candidate sets...";
    demo = new AnnealDemo(BigInt(num("a-seed")), num("a-trips"), num("a-l0"), num("a-decay"));
    errors = [[0, demo.error()]];
    render();
  });
  $("a-run").onclick = () => {
    if (!demo) $("a-new").onclick();
    running = !running;
    if (running) requestAnimationFrame(tick);
  };
  $("a-char").onchange = guard("a-msg", render);
}

function setupComparison() {
  let parsed = null;
  const render = () => {
    if (!parsed) return;
    const tag = $("c-char").value;
    const rows = parsed.bins.filter((r) => r[0] === tag);
    bars($("c-plot"), [rows.map((r) => +r[3]), rows.map((r) => +r[4])], ["#47c", "#e93"]);
  };
  $("c-go").onclick = guard("c-msg", () => {
    const csv = compare_with_planner(BigInt(num("c-seed")), num("c-trips"));
    const [bins, summary] = csv.trim().split("\n\n");
    const rows = (block) => block.split("\n").slice(1).map((l) => l.split(","));
    parsed = { bins: rows(bins), summary: rows(summary) };
    $("c-table").innerHTML =
      "<tr><th>characteristic</th><th>observed mean</th><th>planner mean</th><th>L1</th></tr>" +
      parsed.summary
        .map((r) => `<tr><td>${r[0]}</td><td>${(+r[1]).toFixed(3)}</td><td>${(+r[2]).toFixed(3)}</td><td>${(+r[3]).toFixed(3)}</td></tr>`)
        .join("");
    render();
  });
  $("c-char").onchange = render;
}

await init();
setupTargets();
setupAnnealing();
setupComparison();
