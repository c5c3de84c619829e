/** Browser entry point: wires the session controller to the DOM.
 *
 * Configuration comes from ./config.json (service base URL) and from the
 * query string: ?rater=<id>&task=<GPP|CO2|GPP+CO2>&token=<shared token>.
 */

import { ApiClient } from "./api.js";
import { ChartSeries, drawChart, sharedExtent } from "./chart.js";
import { ControllerState, PairView, SessionController } from "./session.js";

interface UiConfig {
  baseUrl: string;
}

const COLORS = { observation: "#333333", candidate: "#d45500" };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderPair(view: PairView): void {
  el("progress").textContent =
    `${view.progress.done + 1} / ${view.progress.total} — task ${view.task}`;
  for (const side of ["left", "right"] as const) {
    const canvas = el<HTMLCanvasElement>(`chart-${side}`);
    const candidate = view[side];
    const variables = Object.keys(candidate);
    const extent = sharedExtent(
      variables.flatMap((v) => [view.left[v], view.right[v], view.observation[v]]),
    );
    const series: ChartSeries[] = variables.flatMap((v) => [
      { label: `obs ${v}`, values: view.observation[v], color: COLORS.observation },
      { label: `candidate ${v}`, values: candidate[v], color: COLORS.candidate },
    ]);
    drawChart(canvas, series, extent);
  }
}

function render(state: ControllerState): void {
  const banner = el("banner");
  const pairPanel = el("pair-panel");
  const donePanel = el("done-panel");
  banner.hidden = true;
  donePanel.hidden = true;
  pairPanel.hidden = true;

  switch (state.kind) {
    case "loading":
      banner.hidden = false;
      banner.textContent = "Loading…";
      break;
    case "pair":
      pairPanel.hidden = false;
      renderPair(state.view);
      setButtonsEnabled(true);
      break;
    case "submitting":
      pairPanel.hidden = false;
      setButtonsEnabled(false);
      break;
    case "done":
      donePanel.hidden = false;
      el("done-panel").textContent =
        `All pairs annotated for task ${state.task}. ` +
        `Results are available from the service export endpoint.`;
      break;
    case "error":
      banner.hidden = false;
      banner.textContent = `Request failed: ${state.message} — `;
      const retry = document.createElement("button");
      retry.textContent = "Retry";
      retry.onclick = () => void state.retry();
      banner.appendChild(retry);
      break;
  }
}

function setButtonsEnabled(enabled: boolean): void {
  el<HTMLButtonElement>("choose-left").disabled = !enabled;
  el<HTMLButtonElement>("choose-right").disabled = !enabled;
}

async function boot(): Promise<void> {
  const config: UiConfig = await (await fetch("./config.json")).json();
  const params = new URLSearchParams(window.location.search);
  const rater = params.get("rater") ?? "anonymous";
  const task = params.get("task") ?? "GPP";
  const token = params.get("token");

  const api = new ApiClient(config.baseUrl, token);
  const controller = new SessionController(api, rater, task);
  controller.onChange = render;

  el("choose-left").onclick = () => void controller.choose("left");
  el("choose-right").onclick = () => void controller.choose("right");
  document.addEventListener("keydown", (ev) => {
    if (ev.key === "ArrowLeft") void controller.choose("left");
    if (ev.key === "ArrowRight") void controller.choose("right");
  });

  await controller.start();
}

void boot();
