/** Application shell: queue + detail on one screen, dashboard on the other.
 * The service base URL defaults to same-origin; override with
 * ``window.SCENARIOFORGE_BASE_URL`` when serving the UI separately.
 */

import { ApiClient } from "./api.js";
import { DashboardView } from "./dashboard.js";
import { ScenarioDetail } from "./detail.js";
import { el } from "./dom.js";
import { QueueView } from "./queue.js";
import type { PendingItem } from "./types.js";

declare global {
  interface Window {
    SCENARIOFORGE_BASE_URL?: string;
    SCENARIOFORGE_REVIEWER?: string;
  }
}

export interface App {
  client: ApiClient;
  queue: QueueView;
  detail: ScenarioDetail;
  dashboard: DashboardView;
  showView(view: "review" | "dashboard"): Promise<void>;
  root: HTMLElement;
}

export function createApp(container: HTMLElement,
                          baseUrl?: string, reviewer?: string): App {
  const client = new ApiClient(
    baseUrl ?? window.SCENARIOFORGE_BASE_URL ?? "",
    reviewer ?? window.SCENARIOFORGE_REVIEWER ?? "reviewer");

  const detail = new ScenarioDetail(client, () => void queue.refresh());
  const queue = new QueueView(client, (item: PendingItem) => {
    void detail.open(item.scenario_id, item.stage);
  });
  const dashboard = new DashboardView(client);

  const reviewPane = el("div", { class: "view review-view" },
    queue.root, detail.root);
  const dashboardPane = el("div", { class: "view dashboard-view hidden" },
    dashboard.root);

  const nav = el("nav", {},
    el("button", { "data-view": "review", class: "active" }, "Review queue"),
    el("button", { "data-view": "dashboard" }, "Dashboard"));

  async function showView(view: "review" | "dashboard"): Promise<void> {
    reviewPane.classList.toggle("hidden", view !== "review");
    dashboardPane.classList.toggle("hidden", view !== "dashboard");
    for (const button of nav.querySelectorAll("button")) {
      button.classList.toggle("active",
        button.getAttribute("data-view") === view);
    }
    if (view === "review") {
      await queue.loadUseCaseOptions();
      await queue.refresh();
    } else {
      await dashboard.refresh();
    }
  }

  nav.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const view = target.getAttribute("data-view");
    if (view === "review" || view === "dashboard") void showView(view);
  });

  const root = el("div", { class: "app" },
    el("header", {}, el("h1", {}, "Scenario review"), nav),
    reviewPane, dashboardPane);
  container.append(root);

  return { client, queue, detail, dashboard, showView, root };
}

// Browser entry point; tests build the app explicitly instead.
if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = createApp(document.getElementById("app")!);
  void app.showView("review");
}
