/** Operator console: configuration form, live experiment view, results. */

import { AgentApi, ApiError, type FieldError, type SessionInfo } from "./api.js";
import { drawChart } from "./charts.js";
import { checkForm, DEFAULT_FORM, type FormState } from "./form.js";
import { buildResultsModel } from "./results.js";
import { LiveViewModel } from "./viewmodel.js";
import { LiveSocket } from "./ws.js";

const api = new AgentApi("");
const app = document.getElementById("app") as HTMLElement;

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function banner(message: string): HTMLElement {
  return el("div", { class: "banner" }, message);
}

// -- configuration screen -----------------------------------------------------

const FIELD_LABELS: [keyof FormState, string][] = [
  ["server_host", "Server host"],
  ["control_port", "Control port"],
  ["data_tcp_port", "Data TCP port (blank: control+1)"],
  ["data_udp_port", "Data UDP port (blank: control+2)"],
  ["transport", "Transport"],
  ["direction", "Direction"],
  ["udp_payload_bytes", "UDP payload bytes"],
  ["target_send_rate_bps", "Target rate (bit/s, blank: default)"],
  ["url", "HTTP URL"],
  ["duration_s", "Duration (s, blank: manual stop)"],
  ["reference_lat", "Reference latitude"],
  ["reference_lon", "Reference longitude"],
  ["gps", "GPS source"],
  ["radio", "Radio source"],
];

const SELECTS: Partial<Record<keyof FormState, string[]>> = {
  transport: ["tcp", "udp", "http"],
  direction: ["downlink", "uplink"],
};

function renderHome(): void {
  app.replaceChildren();
  const form = { ...DEFAULT_FORM };
  const heading = el("h1", {}, "cdmt console");
  const formCard = el("section", { class: "card" });
  formCard.append(el("h2", {}, "Configuration"));
  const errorSlots = new Map<string, HTMLElement>();

  for (const [name, label] of FIELD_LABELS) {
    const row = el("label", { class: "field" });
    row.append(el("span", {}, label));
    let input: HTMLInputElement | HTMLSelectElement;
    if (SELECTS[name]) {
      input = el("select") as HTMLSelectElement;
      for (const option of SELECTS[name]!) {
        input.append(el("option", { value: option }, option));
      }
      input.value = form[name];
    } else {
      input = el("input", { value: form[name] }) as HTMLInputElement;
    }
    input.addEventListener("input", () => {
      form[name] = input.value;
      refreshErrors();
    });
    const slot = el("span", { class: "error" });
    errorSlots.set(name, slot);
    row.append(input, slot);
    formCard.append(row);
  }

  const submit = el("button", {}, "Create session") as HTMLButtonElement;
  const note = el("div", { class: "note" });
  formCard.append(submit, note);

  function refreshErrors(): Map<string, string> {
    const { errors } = checkForm(form);
    for (const [name, slot] of errorSlots) {
      slot.textContent = errors.get(name) ?? "";
    }
    submit.disabled = errors.size > 0;
    return errors;
  }
  refreshErrors();

  submit.addEventListener("click", async () => {
    const { body, ok } = checkForm(form);
    if (!ok) return;
    try {
      const session = await api.createSession(body);
      location.hash = `#/live/${session.id}`;
    } catch (err) {
      if (err instanceof ApiError && Array.isArray(err.detail)) {
        for (const { field, message } of err.detail as FieldError[]) {
          errorSlots.get(field)?.replaceChildren(document.createTextNode(message));
        }
        note.textContent = "the agent rejected the configuration";
      } else {
        note.textContent = `agent unreachable: ${err}`;
      }
    }
  });

  const listCard = el("section", { class: "card" });
  listCard.append(el("h2", {}, "Sessions"));
  const list = el("div");
  listCard.append(list);
  api
    .listSessions()
    .then(({ sessions }) => {
      if (sessions.length === 0) {
        list.append(el("p", { class: "note" }, "no sessions yet"));
        return;
      }
      for (const session of sessions) {
        const row = el("div", { class: "session-row" });
        row.append(
          el("span", { class: `chip state-${session.state}` }, session.state),
          el("span", {}, `#${session.id} ${describe(session)}`),
        );
        const view = el("a", {
          href:
            session.state === "finished" || session.state === "failed"
              ? `#/results/${session.id}`
              : `#/live/${session.id}`,
        }, "open");
        row.append(view);
        list.append(row);
      }
    })
    .catch((err) => list.append(banner(`agent unreachable: ${err}`)));

  app.append(heading, formCard, listCard);
}

function describe(session: SessionInfo): string {
  const config = session.config;
  return `${config.transport ?? "?"} ${config.direction ?? "?"} -> ${
    config.server_host ?? config.url ?? ""
  }`;
}

// -- live screen ---------------------------------------------------------------

function renderLive(id: number): void {
  app.replaceChildren();
  const model = new LiveViewModel();
  app.append(el("h1", {}, `Running experiment #${id}`));
  const chips = el("div", { class: "chips" });
  const stateChip = el("span", { class: "chip" }, "…");
  const pciChip = el("span", { class: "chip" }, "PCI –");
  const handoverChip = el("span", { class: "chip flash hidden" }, "");
  chips.append(stateChip, pciChip, handoverChip);

  const stop = el("button", {}, "Stop") as HTMLButtonElement;
  stop.addEventListener("click", () => {
    api.stopSession(id).catch(() => undefined);
  });
  const toResults = el("a", { href: `#/results/${id}` }, "results");

  const bar = el("div", { class: "toolbar" });
  bar.append(chips, stop, toResults);

  const canvases = {
    throughput: el("canvas", { width: "840", height: "170" }) as HTMLCanvasElement,
    delay: el("canvas", { width: "840", height: "170" }) as HTMLCanvasElement,
    rsrp: el("canvas", { width: "840", height: "170" }) as HTMLCanvasElement,
  };
  const gps = el("div", { class: "note" }, "GPS: no fix");
  app.append(bar, canvases.throughput, canvases.delay, canvases.rsrp, gps);

  function redraw(): void {
    drawChart(canvases.throughput, model.series(model.throughputMbps), {
      label: "throughput [Mbit/s]",
    });
    drawChart(canvases.delay, model.series(model.delayMs), {
      label: "mean one-way delay [ms]",
      color: "#ffb454",
    });
    drawChart(canvases.rsrp, model.series(model.rsrpDbm), {
      label: "RSRP [dBm]",
      color: "#9fe06c",
    });
    pciChip.textContent = model.currentPci === null ? "PCI –" : `PCI ${model.currentPci}`;
    if (model.lastHandover) {
      handoverChip.textContent =
        `handover ${model.lastHandover.fromPci} -> ${model.lastHandover.toPci}`;
      handoverChip.classList.remove("hidden");
    }
    const row = model.lastRow;
    if (row && row.lat_deg) {
      gps.textContent =
        `GPS: ${row.lat_deg}, ${row.lon_deg} alt ${row.alt_m} m ` +
        `(${row.satellites} sats)` +
        (row.distance_m ? ` — ${row.distance_m} m from reference` : "");
    }
  }

  async function pollState(): Promise<void> {
    try {
      const info = await api.getSession(id);
      stateChip.textContent = info.state;
      stateChip.className = `chip state-${info.state}`;
      if (info.state === "configured") {
        await api.startSession(id);
        stateChip.textContent = "running";
      }
      if (info.state === "finished" || info.state === "failed") {
        return;
      }
    } catch (err) {
      app.prepend(banner(`agent unreachable: ${err}`));
    }
    setTimeout(pollState, 1000);
  }

  const socket = new LiveSocket(
    api.liveUrl(id),
    {
      onMessage: (text) => {
        model.onRecord(JSON.parse(text));
        redraw();
      },
      onGap: () => {
        model.onGap();
        redraw();
      },
      onClose: () => undefined,
    },
  );
  window.addEventListener("hashchange", () => socket.close(), { once: true });
  void pollState();
}

// -- results screen --------------------------------------------------------------

const TOTAL_LABELS: Record<string, string> = {
  record_count: "records",
  total_bytes: "total bytes",
  mean_bps: "mean throughput [bit/s]",
  min_bps: "min throughput [bit/s]",
  max_bps: "max throughput [bit/s]",
  mean_delay_ms: "mean delay [ms]",
  handover_count: "handovers",
};

async function renderResults(id: number): Promise<void> {
  app.replaceChildren();
  app.append(el("h1", {}, `Results overview #${id}`));
  let info: SessionInfo;
  try {
    info = await api.getSession(id);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      app.append(banner(`session ${id} does not exist`));
    } else {
      app.append(banner(`agent unreachable: ${err}`));
    }
    return;
  }
  const analysis = await api.getAnalysis(id);
  const model = buildResultsModel(info, analysis);

  const card = el("section", { class: "card" });
  card.append(el("h2", {}, `state: ${model.state}` +
    (model.stopReason ? ` (${model.stopReason})` : "")));
  if (info.error) card.append(banner(info.error));
  if (model.empty) {
    card.append(el("p", { class: "note" }, "no data recorded"));
    app.append(card);
    return;
  }
  const table = el("table", { class: "totals" });
  for (const [key, value] of Object.entries(model.totals)) {
    const row = el("tr");
    row.append(el("td", {}, TOTAL_LABELS[key] ?? key), el("td", {}, value));
    table.append(row);
  }
  card.append(table);
  app.append(card);

  const ecdfCanvas = el("canvas", { width: "840", height: "220" }) as HTMLCanvasElement;
  const tpCanvas = el("canvas", { width: "840", height: "220" }) as HTMLCanvasElement;
  app.append(ecdfCanvas, tpCanvas);
  drawChart(ecdfCanvas, model.ecdf, {
    label: "RSRP ECDF (F(x) vs dBm)",
    step: true,
    color: "#9fe06c",
  });
  drawChart(tpCanvas, model.throughputBps.map(
    ([t, v]) => [t, v / 1e6] as [number, number],
  ), { label: "throughput [Mbit/s] vs time" });
}

// -- router -----------------------------------------------------------------------

function route(): void {
  const hash = location.hash || "#/";
  const live = hash.match(/^#\/live\/(\d+)$/);
  const results = hash.match(/^#\/results\/(\d+)$/);
  if (live) {
    renderLive(Number(live[1]));
  } else if (results) {
    void renderResults(Number(results[1]));
  } else {
    renderHome();
  }
}

window.addEventListener("hashchange", route);
route();
