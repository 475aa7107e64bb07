import init, { score_guess, geoscore_curve, parse_answer, simulate_duel } from "./pkg/geobench_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function drawCurve(marker) {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const maxKm = 5000;
  const pts = JSON.parse(geoscore_curve(maxKm, 400));
  const pad = 36, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const x = (d) => pad + (d / maxKm) * w;
  const y = (s) => pad + h - (s / 5000) * h;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#bbb";
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  for (const km of [1, 25, 200, 750, 2500]) {
    ctx.beginPath();
    ctx.moveTo(x(km), pad);
    ctx.lineTo(x(km), pad + h);
    ctx.stroke();
    if (km >= 200) ctx.fillText(`${km} km`, x(km) + 3, pad + 10);
  }
  ctx.strokeStyle = "#333";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillText("5000", 2, y(5000) + 4);
  ctx.fillText("0", 20, y(0));

  ctx.strokeStyle = "#1f6feb";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([d, s], i) => (i ? ctx.lineTo(x(d), y(s)) : ctx.moveTo(x(d), y(s))));
  ctx.stroke();
  ctx.lineWidth = 1;

  if (marker && marker.distance_km <= maxKm) {
    ctx.fillStyle = "#d1242f";
    ctx.beginPath();
    ctx.arc(x(marker.distance_km), y(marker.geoscore), 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function updateScore() {
  const r = JSON.parse(score_guess(num("t-lat"), num("t-lon"), num("g-lat"), num("g-lon")));
  if (r.error) {
    $("score-out").textContent = r.error;
    drawCurve(null);
    return;
  }
  $("score-out").textContent =
    `distance ${r.distance_km.toFixed(1)} km   GeoScore ${r.geoscore.toFixed(1)}   level ${r.boundary}`;
  drawCurve(r);
}

function updateParse() {
  $("parse-out").textContent = JSON.stringify(JSON.parse(parse_answer($("answer").value)), null, 2);
}

const fmt = (v, digits) => (v === null || v === undefined ? "n/a" : v.toFixed(digits));

function updateDuel() {
  const r = JSON.parse(simulate_duel(num("d-rounds"), num("d-agent"), num("d-opp"), num("d-sigma"), BigInt($("d-seed").value || 0)));
  const table = $("duel-table");
  if (r.error) {
    table.innerHTML = `<tr><td>${r.error}</td></tr>`;
    return;
  }
  const s = r.summary;
  const rows = [
    ["Average Score", fmt(s.agent.average_score, 1), fmt(s.opponent.average_score, 1)],
    ["Win Rate (%)", fmt(s.agent.win_rate, 2), fmt(s.opponent.win_rate, 2)],
    ["Closest Distance (km)", fmt(s.agent.closest_km, 1), fmt(s.opponent.closest_km, 1)],
    ["Farthest Distance (km)", fmt(s.agent.farthest_km, 1), fmt(s.opponent.farthest_km, 1)],
    ["Draws", String(s.draws), ""],
  ];
  table.innerHTML =
    "<tr><th></th><th>Agent</th><th>Opponent</th></tr>" +
    rows.map((row) => `<tr>${row.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");

  const canvas = $("duel-chart");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const n = r.rounds.length, bw = canvas.width / n, mid = canvas.height / 2;
  r.rounds.forEach((round, i) => {
    const diff = (round.agent_score - round.opponent_score) / 5000;
    ctx.fillStyle = diff >= 0 ? "#1f883d" : "#d1242f";
    ctx.fillRect(i * bw + 1, mid, Math.max(bw - 2, 1), -diff * (mid - 4));
  });
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(canvas.width, mid);
  ctx.stroke();
}

await init();
for (const id of ["t-lat", "t-lon", "g-lat", "g-lon"]) $(id).addEventListener("input", updateScore);
$("answer").addEventListener("input", updateParse);
for (const id of ["d-rounds", "d-agent", "d-opp", "d-sigma", "d-seed"]) $(id).addEventListener("input", updateDuel);
updateScore();
updateParse();
updateDuel();
