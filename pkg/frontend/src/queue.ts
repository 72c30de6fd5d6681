/** Pending review queue: server order (oldest first) preserved verbatim. */

import { ApiClient } from "./api.js";
import { clear, el, option } from "./dom.js";
import { STAGE_LABELS, type PendingItem } from "./types.js";

export class QueueView {
  readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly onOpen: (item: PendingItem) => void;
  private readonly list: HTMLElement;
  private readonly stageFilter: HTMLSelectElement;
  private readonly useCaseFilter: HTMLSelectElement;

  constructor(client: ApiClient, onOpen: (item: PendingItem) => void) {
    this.client = client;
    this.onOpen = onOpen;
    this.stageFilter = el("select", { class: "filter", "data-role": "stage-filter" },
      option("", "All stages"), option("1", "Stage 1"),
      option("2", "Stage 2"), option("3", "Stage 3"));
    this.useCaseFilter = el("select",
      { class: "filter", "data-role": "use-case-filter" },
      option("", "All use cases"));
    this.list = el("div", { class: "queue-list" });
    const controls = el("div", { class: "queue-controls" },
      this.useCaseFilter, this.stageFilter,
      el("button", { class: "refresh", "data-role": "refresh" }, "Refresh"));
    controls.querySelector("[data-role=refresh]")!
      .addEventListener("click", () => void this.refresh());
    this.stageFilter.addEventListener("change", () => void this.refresh());
    this.useCaseFilter.addEventListener("change", () => void this.refresh());
    this.root = el("section", { class: "queue" },
      el("h2", {}, "Pending reviews"), controls, this.list);
  }

  async loadUseCaseOptions(): Promise<void> {
    const useCases = await this.client.listUseCases();
    const current = this.useCaseFilter.value;
    clear(this.useCaseFilter).append(option("", "All use cases"));
    for (const uc of useCases) {
      this.useCaseFilter.append(option(uc.doc.id, uc.doc.name));
    }
    this.useCaseFilter.value = current;
  }

  async refresh(): Promise<void> {
    const filter: { stage?: number; useCase?: string } = {};
    if (this.stageFilter.value) filter.stage = Number(this.stageFilter.value);
    if (this.useCaseFilter.value) filter.useCase = this.useCaseFilter.value;
    const items = await this.client.pendingReviews(filter);
    clear(this.list);
    if (items.length === 0) {
      this.list.append(el("p", { class: "empty" }, "Nothing pending review."));
      return;
    }
    for (const item of items) {
      const row = el("div", {
        class: "queue-item",
        "data-scenario": item.scenario_id,
        "data-stage": item.stage,
      },
        el("span", { class: "badge stage" }, STAGE_LABELS[item.stage]),
        el("span", { class: "title" }, item.title),
        el("span", { class: "meta" },
          `${item.scenario_id} · waiting since ${item.pending_since}`));
      row.addEventListener("click", () => this.onOpen(item));
      this.list.append(row);
    }
  }
}
