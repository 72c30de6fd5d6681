/** Dashboard: per-use-case stage counts, taxonomy coverage heatmap, export
 * downloads, and expansion controls for operators. Every number on screen is
 * read straight from a service payload.
 */

import { ApiClient, ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import type { StageName, StageStateName } from "./types.js";

const STAGES: StageName[] = ["stage1", "stage2", "stage3"];
const SHOWN_STATES: StageStateName[] = [
  "pending_review", "changes_requested", "approved", "rejected"];

export class DashboardView {
  readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly cards: HTMLElement;
  private readonly heatmap: HTMLElement;
  private readonly jobLog: HTMLElement;

  constructor(client: ApiClient) {
    this.client = client;
    this.cards = el("div", { class: "cards" });
    this.heatmap = el("div", { class: "heatmap" });
    this.jobLog = el("div", { class: "job-log", "data-role": "job-log" });
    const exports = el("div", { class: "exports" },
      el("a", { href: client.exportUrl("csv"), download: "summary.csv" },
        "Download summary (CSV)"),
      el("a", { href: client.exportUrl("md"), download: "summary.md" },
        "Download summary (Markdown)"));
    this.root = el("section", { class: "dashboard" },
      el("h2", {}, "Dashboard"), this.cards,
      el("h3", {}, "Risk coverage"), this.heatmap, exports, this.jobLog);
  }

  async refresh(): Promise<void> {
    const useCases = await this.client.listUseCases();
    clear(this.cards);
    for (const uc of useCases) {
      const summary = await this.client.useCaseStatus(uc.doc.id);
      const table = el("table", { class: "status-table" });
      const header = el("tr", {}, el("th", {}, ""));
      for (const state of SHOWN_STATES) {
        header.append(el("th", {}, state.replace("_", " ")));
      }
      table.append(header);
      for (const stage of STAGES) {
        const row = el("tr", { "data-stage-row": stage },
          el("th", {}, stage));
        for (const state of SHOWN_STATES) {
          row.append(el("td", { "data-count": `${stage}.${state}` },
            String(summary.per_stage[stage]?.[state] ?? 0)));
        }
        table.append(row);
      }
      const card = el("div", { class: "card", "data-use-case": uc.doc.id },
        el("h3", {}, uc.doc.name),
        el("p", { class: "meta" },
          `${uc.doc.id} · `,
          el("span", { "data-role": "total" },
            String(summary.total_scenarios)),
          " scenario(s)"),
        table,
        this.expandControls(uc.doc.id));
      this.cards.append(card);
    }
    await this.refreshHeatmap();
  }

  private expandControls(useCaseId: string): HTMLElement {
    const count = el("input", {
      type: "number", min: "1", value: "18", "data-role": "expand-count",
    });
    const stageSelect = el("select", { "data-role": "expand-stage" });
    for (const [value, label] of [["1", "Stage 1 (new scenarios)"],
                                  ["2", "Stage 2 (elements)"],
                                  ["3", "Stage 3 (narrative)"]]) {
      const opt = el("option", { value: value! }, label!);
      stageSelect.append(opt);
    }
    const run = el("button", { "data-role": "expand" }, "Expand");
    run.addEventListener("click", () => {
      const stage = Number(stageSelect.value);
      void this.runExpansion(
        useCaseId, stage, stage === 1 ? Number(count.value) : undefined);
    });
    return el("div", { class: "expand-controls" }, stageSelect, count, run);
  }

  private async runExpansion(useCaseId: string, stage: number,
                             count?: number): Promise<void> {
    const log = (text: string) =>
      this.jobLog.append(el("p", {}, text));
    try {
      const jobId = await this.client.expand(useCaseId, stage, count);
      log(`${useCaseId}: job ${jobId} queued`);
      const job = await this.client.waitForJob(jobId);
      log(`${useCaseId}: job ${jobId} ${job.doc.status} (${job.doc.detail})`);
    } catch (error) {
      if (error instanceof ApiError) {
        log(`${useCaseId}: expansion refused (${error.code}): ${error.message}`);
        return;
      }
      throw error;
    }
    await this.refresh();
  }

  private async refreshHeatmap(): Promise<void> {
    const coverage = await this.client.coverage();
    clear(this.heatmap);
    const max = Math.max(1, ...Object.values(coverage.counts));
    const table = el("table", { class: "heatmap-table" });
    const header = el("tr", {}, el("th", {}, "Risk category"),
      el("th", {}, "Scenarios"));
    table.append(header);
    for (const [categoryId, count] of Object.entries(coverage.counts)) {
      const intensity = count === 0 ? 0 : Math.ceil((count / max) * 4);
      table.append(el("tr", {},
        el("th", {}, categoryId),
        el("td", {
          class: `heat heat-${intensity}`,
          "data-category": categoryId,
        }, String(count))));
    }
    this.heatmap.append(
      el("p", { class: "meta" },
        `${coverage.total_scenarios} scenario(s) in scope`),
      table);
  }
}
