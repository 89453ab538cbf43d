import init, { detect_places, compile_timeline, circle_radius } from "./pkg/footprint_web.js";

const $ = (id) => document.getElementById(id);
const GREEN = "#2e9d4a", BLUE = "#3a6fd8", GREY = "#c9ced6";
const SAMPLE = { date: "2013-05-01", tz_offset_minutes: 60 };

function bindSlider(id, onChange) {
  const input = $(id), out = $(id + "-out");
  const update = () => { out.textContent = input.value; onChange(); };
  input.addEventListener("input", update);
  out.textContent = input.value;
}

function showError(el, err) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(err);
  el.appendChild(p);
}

// equirectangular projection of the trace's bounding box
function projector(bounds, canvas, pad) {
  const [lat0, lon0, lat1, lon1] = bounds;
  const k = Math.cos(((lat0 + lat1) / 2) * Math.PI / 180);
  const w = Math.max((lon1 - lon0) * k, 1e-6), h = Math.max(lat1 - lat0, 1e-6);
  const s = Math.min((canvas.width - 2 * pad) / w, (canvas.height - 2 * pad) / h);
  return ([lat, lon]) => [pad + (lon - lon0) * k * s, canvas.height - pad - (lat - lat0) * s];
}

function drawPlaces() {
  const canvas = $("map"), ctx = canvas.getContext("2d"), info = $("places-info");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let view;
  try {
    view = JSON.parse(detect_places($("gps").value, +$("radius").value, +$("dwell").value, +$("merge").value));
  } catch (e) {
    return showError(info, e);
  }
  if (!view.bounds) return showError(info, "empty trace");
  const project = projector(view.bounds, canvas, 50);
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.beginPath();
  view.track.forEach((p, i) => { const [x, y] = project(p); i ? ctx.lineTo(x, y) : ctx.moveTo(x, y); });
  ctx.stroke();
  // largest first so small places stay visible on top
  const places = [...view.places].sort((a, b) => b.radius_px - a.radius_px);
  for (const p of places) {
    const [x, y] = project([p.centroid_lat, p.centroid_lon]);
    ctx.beginPath();
    ctx.arc(x, y, p.radius_px, 0, 2 * Math.PI);
    ctx.fillStyle = "rgba(46,157,74,0.45)";
    ctx.fill();
    ctx.strokeStyle = GREEN;
    ctx.stroke();
  }
  const rows = view.places
    .map((p, i) => `#${i}  ${(p.total_dwell_s / 60).toFixed(0)} min  ${p.visits} visit(s)  r=${p.radius_px.toFixed(1)} px`)
    .join("\n");
  info.innerHTML = "";
  const pre = document.createElement("pre");
  pre.textContent = `${view.track.length} fixes, ${view.stay_points.length} stay points, ` +
    `${view.transitions} transitions, ${view.places.length} places\n${rows}`;
  info.appendChild(pre);
}

const FILL = { present: GREEN, stationary: GREEN, call: GREEN, transition: GREEN, absent: BLUE, "covered-idle": GREY, covered: GREY };

function drawTimeline(texts) {
  const canvas = $("bars"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let view;
  try {
    const req = { ...SAMPLE, ...texts, radius_m: +$("radius").value, min_dwell_s: +$("dwell").value, visual_gap_s: +$("gap").value };
    req.gps = $("gps").value;
    view = JSON.parse(compile_timeline(JSON.stringify(req)));
  } catch (e) {
    return showError($("summary"), e);
  }
  const tl = view.timeline;
  const t0 = Date.parse(tl.window.start), span = Date.parse(tl.window.end) - t0;
  const left = 80, width = canvas.width - left - 10, barH = 28;
  const x = (t) => left + ((Date.parse(t) - t0) / span) * width;
  ["visual", "location", "call", "sms"].forEach((name, row) => {
    const y = 10 + row * (barH + 12), track = tl[name];
    ctx.fillStyle = "#222";
    ctx.font = "12px system-ui";
    ctx.fillText(name, 8, y + barH / 2 + 4);
    for (const seg of track.segments) {
      const x0 = x(seg.start), x1 = x(seg.end);
      if (seg.kind === "transition") {
        ctx.fillStyle = "#fff";
        ctx.fillRect(x0, y, x1 - x0, barH);
        ctx.strokeStyle = GREEN;
        ctx.setLineDash([4, 3]);
        ctx.lineWidth = 3;
        ctx.beginPath();
        ctx.moveTo(x0, y + barH / 2);
        ctx.lineTo(x1, y + barH / 2);
        ctx.stroke();
        ctx.setLineDash([]);
      } else {
        ctx.fillStyle = FILL[seg.kind] ?? "#f0f";
        ctx.fillRect(x0, y, Math.max(x1 - x0, 1), barH);
      }
    }
    for (const m of track.markers ?? []) {
      ctx.strokeStyle = m.direction === "incoming" ? "#d62020" : "#e09b00";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(x(m.t), y - 3);
      ctx.lineTo(x(m.t), y + barH + 3);
      ctx.stroke();
    }
  });
  $("summary").textContent = view.summary + (view.warnings.length ? "\nwarnings:\n" + view.warnings.join("\n") : "");
}

function drawCircle() {
  const canvas = $("circle"), ctx = canvas.getContext("2d"), info = $("circle-info");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  try {
    const r = circle_radius(+$("d").value, +$("dmax").value, 6, 40);
    ctx.beginPath();
    ctx.arc(canvas.width / 2, canvas.height / 2, r, 0, 2 * Math.PI);
    ctx.fillStyle = "rgba(46,157,74,0.45)";
    ctx.fill();
    info.textContent = `radius ${r.toFixed(2)} px`;
  } catch (e) {
    showError(info, e);
  }
}

async function main() {
  await init();
  const load = (name) => fetch(`./sample/${name}.csv`).then((r) => r.text());
  const [gps, context, images, coverage] = await Promise.all(["gps", "context", "images", "coverage"].map(load));
  $("gps").value = gps;
  const texts = { context, images, coverage };
  const refresh = () => { drawPlaces(); drawTimeline(texts); };
  ["radius", "dwell", "merge", "gap"].forEach((id) => bindSlider(id, refresh));
  ["d", "dmax"].forEach((id) => bindSlider(id, drawCircle));
  $("gps").addEventListener("change", refresh);
  refresh();
  drawCircle();
}

main();
