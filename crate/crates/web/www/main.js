import init, { listScenarios, runScenario, tamperProbe, TicDesk } from "./pkg/ticpay_web.js";

const $ = (id) => document.getElementById(id);

function seedValue() {
  const v = $("seed").value.trim();
  return v === "" ? undefined : BigInt(v);
}

function showRun(result) {
  const { report, deliveries } = JSON.parse(result);
  $("verdict").className = report.passed ? "pass" : "fail";
  $("verdict").textContent = report.passed ? "all checks pass" : "checks failed";
  const lines = [];
  for (const o of report.outcomes) lines.push(`${o.client} ${o.request_id}: ${o.outcome}`);
  for (const a of report.attacks) lines.push(`attack at #${a.seq} (${a.kind} ${a.msg_type}): ${a.result}`);
  for (const c of report.checks) if (!c.passed) lines.push(`check ${c.name} failed: ${c.detail}`);
  lines.push("");
  for (const d of deliveries) {
    lines.push(`#${String(d.seq).padStart(2)} t=${String(d.time).padStart(3)}  ${d.from} -> ${d.to}  ${d.msg_type} (${d.bytes} B)`);
  }
  $("run-out").textContent = lines.join("\n");
}

function guard(target, f) {
  try {
    f();
  } catch (e) {
    target.textContent = String(e.message ?? e);
  }
}

await init();

for (const { name, description } of JSON.parse(listScenarios())) {
  const opt = new Option(name, name);
  opt.title = description;
  $("scenario").add(opt);
}

$("run").onclick = () =>
  guard($("run-out"), () => {
    $("verdict").textContent = "";
    const source = $("toml").value.trim() || $("scenario").value;
    showRun(runScenario(source, seedValue()));
  });

// one registry per code shape, so earlier batches stay redeemable
let desk = null;
let shape = "";
$("issue").onclick = () =>
  guard($("codes"), () => {
    const want = `${$("len").value}/${$("alnum").checked}`;
    if (want !== shape) {
      desk = new TicDesk(Number($("len").value), $("alnum").checked);
      shape = want;
    }
    const codes = desk.issue($("account").value, Number($("count").value), BigInt(Date.now()));
    $("codes").textContent = codes;
    $("code").value = codes.split("\n")[0];
  });

$("redeem").onclick = () => {
  $("redeemed").textContent = desk ? desk.redeem($("account").value, $("code").value) : "issue a batch first";
};

$("tamper").onclick = () =>
  guard($("tamper-out"), () => {
    const r = JSON.parse(tamperProbe(Number($("byte").value), Number($("bit").value), 1n));
    const lines = [`outcome: ${r.outcome}`, `funds before/after: ${r.funds_before} / ${r.funds_after}`];
    for (const a of r.attacks) lines.push(`#${a.seq} ${a.msg_type}: ${a.result}`);
    $("tamper-out").textContent = lines.join("\n");
  });
