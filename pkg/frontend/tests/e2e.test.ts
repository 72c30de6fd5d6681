// @vitest-environment jsdom
/** End-to-end: the real UI components drive a live pipeline service backed
 * by the deterministic mock generation backend. Covers the approve,
 * edit-with-validation-block, regeneration-request, and rubric-scoring
 * flows, stale-revision recovery, and dashboard/payload equality.
 */
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { createApp, type App } from "../src/main.js";

const PORT = 18731 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;
const UC = "uc-internal-call-center-support";

const SERVICE_SCRIPT = `
import sys
import uvicorn
from scenarioforge.bootstrap import initialize_store
from scenarioforge.service import create_app

store = initialize_store(sys.argv[1], durability="relaxed")
app = create_app(store)
uvicorn.run(app, host="127.0.0.1", port=int(sys.argv[2]), log_level="error")
`;

let service: ChildProcess;

async function waitFor(predicate: () => boolean | Promise<boolean>,
                       what: string, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await predicate()) return;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

beforeAll(async () => {
  const storeDir = join(mkdtempSync(join(tmpdir(), "sfui-")), "store");
  service = spawn("python3", ["-c", SERVICE_SCRIPT, storeDir, String(PORT)],
                  { stdio: ["ignore", "inherit", "inherit"] });
  await waitFor(async () => {
    try {
      const response = await fetch(`${BASE}/api/use-cases`);
      return response.ok;
    } catch {
      return false;
    }
  }, "service startup", 30_000);
}, 40_000);

afterAll(() => {
  service?.kill("SIGTERM");
});

function newApp(reviewer = "alice"): App {
  document.body.replaceChildren();
  return createApp(document.body, BASE, reviewer);
}

/** Drive the pipeline via the client where the flow under test starts
 * mid-pipeline (expansion itself is exercised via the dashboard test). */
async function makePending(client: ApiClient, useCase: string,
                           count: number): Promise<string[]> {
  const jobId = await client.expand(useCase, 1, count);
  const job = await client.waitForJob(jobId);
  expect(job.doc.status).toBe("awaiting_review");
  return job.doc.scenario_ids;
}

describe("review workspace flows", () => {
  beforeEach(() => {
    document.body.replaceChildren();
  });

  it("approve flow: queue item leaves the queue and the badge updates",
     async () => {
    const app = newApp();
    const [sid] = await makePending(app.client, UC, 2);
    await app.showView("review");
    const before = app.queue.root.querySelectorAll(
      `.queue-item[data-stage=stage1]`).length;
    expect(before).toBeGreaterThanOrEqual(2);

    (app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`) as HTMLElement).click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=decision]") !== null, "decision panel");

    (app.detail.root.querySelector("[data-role=submit]") as HTMLElement)
      .click();
    await waitFor(() => {
      const badge = app.detail.root.querySelector(
        "[data-stage-badge=stage1]");
      return badge?.textContent?.includes("Approved") ?? false;
    }, "approved badge");
    await waitFor(() => app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`) === null, "item left queue");
  }, 30_000);

  it("edit flow: a two-sentence description blocks submission with the "
     + "finding on the field, then a fixed edit passes", async () => {
    const app = newApp();
    const [sid] = await makePending(app.client, UC, 1);
    await app.showView("review");
    (app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`) as HTMLElement).click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=decision]") !== null, "decision panel");

    const verdict = app.detail.root.querySelector(
      "[data-role=verdict]") as HTMLSelectElement;
    verdict.value = "edit_and_approve";
    verdict.dispatchEvent(new window.Event("change"));
    const description = app.detail.root.querySelector(
      "[data-field-input=description]") as HTMLTextAreaElement;
    description.value = "First sentence. Second sentence.";
    (app.detail.root.querySelector("[data-role=submit]") as HTMLElement)
      .click();

    await waitFor(() => app.detail.root.querySelector(
      '[data-errors=description] .finding[data-rule=one_sentence]') !== null,
      "field-anchored finding");
    // still pending: the submission was blocked
    const fresh = await app.client.getScenario(sid);
    expect(fresh.doc.stage_states.stage1).toBe("pending_review");

    description.value = "A single corrected sentence.";
    (app.detail.root.querySelector("[data-role=submit]") as HTMLElement)
      .click();
    await waitFor(() => {
      const badge = app.detail.root.querySelector(
        "[data-stage-badge=stage1]");
      return badge?.textContent?.includes("Approved") ?? false;
    }, "approved after fix");
    const updated = await app.client.getScenario(sid);
    expect(updated.doc.description).toBe("A single corrected sentence.");
    expect(updated.doc.revisions.at(-1)?.origin).toBe("human_edited");
  }, 30_000);

  it("regeneration flow: comments feed the next draft and the item returns "
     + "to the queue", async () => {
    const app = newApp();
    const [sid] = await makePending(app.client, UC, 1);
    await app.showView("review");
    (app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`) as HTMLElement).click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=decision]") !== null, "decision panel");

    const verdict = app.detail.root.querySelector(
      "[data-role=verdict]") as HTMLSelectElement;
    verdict.value = "request_regeneration";
    verdict.dispatchEvent(new window.Event("change"));
    const comments = app.detail.root.querySelector(
      "[data-role=comments]") as HTMLTextAreaElement;
    comments.value = "Name the concrete workflow in the title.";
    (app.detail.root.querySelector("[data-role=submit]") as HTMLElement)
      .click();
    await waitFor(() => {
      const badge = app.detail.root.querySelector(
        "[data-stage-badge=stage1]");
      return badge?.textContent?.includes("Changes requested") ?? false;
    }, "changes requested badge");

    const before = await app.client.getScenario(sid);
    expect(before.doc.feedback.stage1)
      .toBe("Name the concrete workflow in the title.");
    const revisionsBefore = before.doc.revisions.length;

    // run the stage-1 regeneration batch, then the item is pending again
    const jobId = await app.client.expand(UC, 1);
    const job = await app.client.waitForJob(jobId);
    expect(job.doc.scenario_ids).toContain(sid);
    await app.queue.refresh();
    expect(app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`)).not.toBeNull();
    const after = await app.client.getScenario(sid);
    expect(after.doc.revisions.length).toBe(revisionsBefore + 1);
    expect(after.doc.feedback.stage1).toBeUndefined();
  }, 30_000);

  it("rubric flow: all eights scored 3/5 shows 0.60 and Not Ready",
     async () => {
    const app = newApp();
    const [sid] = await makePending(app.client, UC, 1);
    // march the scenario to fully approved through the service
    await app.client.submitReview(sid, 1, "approve");
    let jobId = await app.client.expand(UC, 2);
    await app.client.waitForJob(jobId);
    await app.client.getScenario(sid);
    await app.client.submitReview(sid, 2, "approve");
    jobId = await app.client.expand(UC, 3);
    await app.client.waitForJob(jobId);
    await app.client.getScenario(sid);
    await app.client.submitReview(sid, 3, "approve");

    await app.detail.open(sid, null);
    await waitFor(() => app.detail.root.querySelectorAll(
      "[data-score]").length === 8, "eight rubric inputs");
    for (const input of app.detail.root.querySelectorAll("[data-score]")) {
      (input as HTMLInputElement).value = "3";
    }
    (app.detail.root.querySelector("[data-role=score-rubric]") as HTMLElement)
      .click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=weighted-score]") !== null, "assessment result");
    expect(app.detail.root.querySelector("[data-role=weighted-score]")
      ?.textContent).toBe("0.60");
    expect(app.detail.root.querySelector("[data-role=verdict]")
      ?.textContent).toBe("Not Ready");
  }, 30_000);

  it("stale revision: a concurrent decision surfaces 409 and reload recovers",
     async () => {
    const app = newApp("alice");
    const [sid] = await makePending(app.client, UC, 1);
    await app.showView("review");
    (app.queue.root.querySelector(
      `.queue-item[data-scenario="${sid}"]`) as HTMLElement).click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=decision]") !== null, "decision panel");

    // a second reviewer decides first, bumping the revision
    const rival = new ApiClient(BASE, "bob");
    await rival.getScenario(sid);
    await rival.submitReview(sid, 1, "approve");

    (app.detail.root.querySelector("[data-role=submit]") as HTMLElement)
      .click();
    await waitFor(() => {
      const banner = app.detail.root.querySelector("[data-role=conflict]");
      return banner !== null && !banner.classList.contains("hidden");
    }, "conflict banner");
    expect(app.detail.root.querySelector("[data-role=conflict]")
      ?.textContent).toContain("revision_conflict");

    (app.detail.root.querySelector("[data-role=reload]") as HTMLElement)
      .click();
    await waitFor(() => {
      const badge = app.detail.root.querySelector(
        "[data-stage-badge=stage1]");
      return badge?.textContent?.includes("Approved") ?? false;
    }, "recovered view shows the fresh state");
    // the stage is decided: no decision panel remains
    expect(app.detail.root.querySelector("[data-role=decision]")).toBeNull();
  }, 30_000);

  it("diff view shows exactly the fields a human edit touched", async () => {
    const app = newApp();
    const [sid] = await makePending(app.client, UC, 1);
    await app.client.getScenario(sid);
    const doc = (await app.client.getScenario(sid)).doc;
    await app.client.submitReview(sid, 1, "edit_and_approve", {
      editedPayload: { title: doc.title,
                       description: "Reviewer replaced the sentence." },
    });
    await app.detail.open(sid, null);
    (app.detail.root.querySelector("[data-role=compare]") as HTMLElement)
      .click();
    await waitFor(() => app.detail.root.querySelector(
      "[data-role=diff-output] .diff-field") !== null, "diff output");
    const fields = [...app.detail.root.querySelectorAll(
      "[data-role=diff-output] .diff-field")]
      .map((node) => node.getAttribute("data-field"));
    expect(fields).toEqual(["description"]);
    expect(app.detail.root.querySelector(".diff-added")).not.toBeNull();
  }, 30_000);
});

describe("dashboard", () => {
  it("cards match pipeline status payloads and heatmap matches coverage",
     async () => {
    const app = newApp();
    await app.showView("dashboard");
    await waitFor(() => app.dashboard.root.querySelectorAll(
      ".card").length === 6, "six use case cards");

    for (const card of app.dashboard.root.querySelectorAll(".card")) {
      const useCaseId = card.getAttribute("data-use-case")!;
      const summary = await app.client.useCaseStatus(useCaseId);
      expect(card.querySelector("[data-role=total]")?.textContent)
        .toBe(String(summary.total_scenarios));
      for (const cell of card.querySelectorAll("[data-count]")) {
        const [stage, state] = cell.getAttribute("data-count")!.split(".");
        const expected =
          summary.per_stage[stage as keyof typeof summary.per_stage]?.[
            state as keyof typeof summary.per_stage.stage1] ?? 0;
        expect(cell.textContent).toBe(String(expected));
      }
    }

    const coverage = await app.client.coverage();
    for (const cell of app.dashboard.root.querySelectorAll("[data-category]")) {
      const category = cell.getAttribute("data-category")!;
      expect(cell.textContent).toBe(String(coverage.counts[category]));
    }
  }, 30_000);

  it("expansion from the dashboard creates pending work", async () => {
    const app = newApp();
    await app.showView("dashboard");
    await waitFor(() => app.dashboard.root.querySelectorAll(
      ".card").length === 6, "cards");
    const card = app.dashboard.root.querySelector(
      '[data-use-case="uc-credit-memo-generation"]')!;
    (card.querySelector("[data-role=expand-count]") as HTMLInputElement)
      .value = "2";
    (card.querySelector("[data-role=expand]") as HTMLElement).click();
    await waitFor(async () => {
      const pending = await app.client.pendingReviews(
        { useCase: "uc-credit-memo-generation" });
      return pending.length >= 2;
    }, "pending work from dashboard expansion", 20_000);
  }, 30_000);
});
