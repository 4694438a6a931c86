import init, { analyze, field, tour } from "./pkg/socialnav_web.js";

const PRESETS = {
  two_pairs: `size = [14.0, 8.0]
robot_start = { x = 1.0, y = 1.0, theta = 0.0 }

[[persons]]
id = 1
x = 3.0
y = 4.0
theta = 0.0

[[persons]]
id = 2
x = 4.0
y = 4.0
theta = 3.141592653589793

[[persons]]
id = 3
x = 11.0
y = 4.0
theta = 0.0

[[persons]]
id = 4
x = 12.0
y = 4.0
theta = 3.141592653589793
`,
  triad_and_pairs: `size = [14.0, 14.0]
robot_start = { x = 1.0, y = 1.0, theta = 0.0 }

[[persons]]
id = 1
x = 3.0
y = 10.6
theta = -0.5235987755982988

[[persons]]
id = 2
x = 4.6
y = 10.6
theta = -2.617993877991494

[[persons]]
id = 3
x = 3.8
y = 9.2
theta = 1.5707963267948966

[[persons]]
id = 4
x = 10.0
y = 11.0
theta = 0.0

[[persons]]
id = 5
x = 11.4
y = 11.0
theta = 3.141592653589793

[[persons]]
id = 6
x = 10.2
y = 3.0
theta = 0.7853981633974483

[[persons]]
id = 7
x = 11.2
y = 3.0
theta = 2.356194490192345

[[obstacles]]
rect = { x_min = 6.0, x_max = 7.0, y_min = 4.5, y_max = 9.5 }

[[obstacles]]
circle = { cx = 8.5, cy = 1.5, radius = 0.5 }
`,
};

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const sceneBox = document.getElementById("scene");
const status = document.getElementById("status");

// Layers are redrawn together so any operation keeps the others visible.
let scene = null;
let fieldLayer = null;
let tourLayer = null;

function scale() {
  const [w, h] = scene.size;
  const s = Math.min(canvas.width / w, canvas.height / h);
  return { s, h };
}

function toPx(x, y) {
  const { s, h } = scale();
  return [x * s, (h - y) * s];
}

function fromPx(px, py) {
  const { s, h } = scale();
  return [px / s, h - py / s];
}

function disc(x, y, r, fill, stroke) {
  const [px, py] = toPx(x, y);
  ctx.beginPath();
  ctx.arc(px, py, r * scale().s, 0, 2 * Math.PI);
  if (fill) { ctx.fillStyle = fill; ctx.fill(); }
  if (stroke) { ctx.strokeStyle = stroke; ctx.stroke(); }
}

function arrow(x, y, theta, len, color) {
  const [px, py] = toPx(x, y);
  const [qx, qy] = toPx(x + len * Math.cos(theta), y + len * Math.sin(theta));
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(qx, qy);
  ctx.stroke();
}

const PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"];

function draw() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!scene) return;

  if (fieldLayer) {
    const { nx, ny, resolution, vectors } = fieldLayer;
    ctx.lineWidth = 1;
    for (let iy = 0; iy < ny; iy++) {
      for (let ix = 0; ix < nx; ix++) {
        const k = 2 * (iy * nx + ix);
        const vx = vectors[k], vy = vectors[k + 1];
        const m = Math.hypot(vx, vy);
        if (m === 0) continue;
        // Log-compressed length keeps the near-person blow-up readable.
        const len = 0.45 * resolution * Math.min(1, Math.log1p(m) / 4);
        arrow(ix * resolution, iy * resolution, Math.atan2(vy, vx), len, "#bbb");
      }
    }
  }

  ctx.lineWidth = 1;
  for (const o of scene.obstacles) {
    if (o.rect) {
      const [x0, y0] = toPx(o.rect.x_min, o.rect.y_max);
      const [x1, y1] = toPx(o.rect.x_max, o.rect.y_min);
      ctx.fillStyle = "#555";
      ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    } else {
      disc(o.circle.cx, o.circle.cy, o.circle.radius, "#555");
    }
  }

  scene.groups.forEach((g, k) => {
    const color = PALETTE[k % PALETTE.length];
    if (g.gaze) disc(g.gaze[0], g.gaze[1], Math.max(g.gaze[2], 0.05), color + "33", color);
    for (const id of g.members) {
      const p = scene.persons.find((q) => q[0] === id);
      if (!p) continue;
      const [, x, y, theta] = p;
      disc(x, y, 0.2, g.kind === "static" ? color : "#fff", color);
      ctx.lineWidth = 2;
      arrow(x, y, theta, 0.45, color);
      ctx.lineWidth = 1;
    }
    if (g.oop) {
      disc(g.oop[0], g.oop[1], 0.12, "#000");
      arrow(g.oop[0], g.oop[1], g.heading, 0.5, "#000");
    }
  });

  if (tourLayer) {
    ctx.lineWidth = 2;
    tourLayer.legs.forEach((leg, k) => {
      ctx.strokeStyle = PALETTE[(k + 3) % PALETTE.length];
      ctx.beginPath();
      leg.forEach(([x, y], i) => {
        const [px, py] = toPx(x, y);
        if (i === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
      });
      ctx.stroke();
    });
    ctx.lineWidth = 1;
  }

  const r = scene.robot;
  disc(r.x, r.y, 0.25, "#ffd700", "#000");
}

function run(label, f) {
  try {
    const t0 = performance.now();
    const msg = f();
    status.textContent = `${label}: ${msg} (${(performance.now() - t0).toFixed(0)} ms)`;
  } catch (e) {
    status.textContent = `${label} failed: ${e}`;
  }
  draw();
}

function doAnalyze() {
  run("groups", () => {
    scene = JSON.parse(analyze(sceneBox.value));
    const observed = scene.groups.filter((g) => g.oop).length;
    return `${scene.groups.length} groups, ${observed} with an observation position`;
  });
}

function loadPreset(name) {
  sceneBox.value = PRESETS[name];
  fieldLayer = null;
  tourLayer = null;
  doAnalyze();
}

await init();

const preset = document.getElementById("preset");
for (const name of Object.keys(PRESETS)) preset.add(new Option(name, name));
preset.onchange = () => loadPreset(preset.value);

document.getElementById("analyze").onclick = () => { tourLayer = null; doAnalyze(); };

document.getElementById("field").onclick = () => run("field", () => {
  fieldLayer = JSON.parse(field(sceneBox.value, +document.getElementById("res").value));
  return `${fieldLayer.nx}x${fieldLayer.ny} samples`;
});

document.getElementById("tour").onclick = () => run("tour", () => {
  const algo = document.getElementById("algo").value;
  tourLayer = JSON.parse(tour(sceneBox.value, algo, +document.getElementById("seed").value));
  return `${tourLayer.algorithm}: ${tourLayer.legs.length} legs, ${tourLayer.length.toFixed(2)} m, ${tourLayer.nodes} nodes`;
});

canvas.onclick = (ev) => {
  if (!scene) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = fromPx(ev.clientX - rect.left, ev.clientY - rect.top);
  sceneBox.value = sceneBox.value.replace(
    /robot_start\s*=\s*\{[^}]*\}/,
    `robot_start = { x = ${x.toFixed(2)}, y = ${y.toFixed(2)}, theta = 0.0 }`,
  );
  tourLayer = null;
  doAnalyze();
};

loadPreset(preset.value);
