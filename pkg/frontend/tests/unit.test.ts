import { describe, expect, it, vi, afterEach } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { wordDiff } from "../src/diff.js";
import {
  findingAnchor,
  formValuesToPayload,
  groupFindings,
  scenarioToFormValues,
} from "../src/editor.js";
import type { ScenarioDoc } from "../src/types.js";

describe("wordDiff", () => {
  it("reconstructs both sides", () => {
    const cases: [string, string][] = [
      ["the quick brown fox", "the slow brown wolf"],
      ["", "entirely new text"],
      ["gone", ""],
      ["same text", "same text"],
      ["a b c d e", "b c x d"],
    ];
    for (const [before, after] of cases) {
      const ops = wordDiff(before, after);
      const rebuiltBefore = ops
        .filter((op) => op.kind !== "added")
        .map((op) => op.text)
        .join("");
      const rebuiltAfter = ops
        .filter((op) => op.kind !== "removed")
        .map((op) => op.text)
        .join("");
      expect(rebuiltBefore).toBe(before);
      expect(rebuiltAfter).toBe(after);
    }
  });

  it("marks identical text as one same-run", () => {
    const ops = wordDiff("unchanged sentence here", "unchanged sentence here");
    expect(ops).toEqual([{ kind: "same", text: "unchanged sentence here" }]);
  });

  it("finds the changed word", () => {
    const ops = wordDiff("rank alerts by severity", "rank alerts by impact");
    expect(ops.some((op) => op.kind === "removed" && op.text === "severity"))
      .toBe(true);
    expect(ops.some((op) => op.kind === "added" && op.text === "impact"))
      .toBe(true);
  });
});

const SCENARIO: ScenarioDoc = {
  kind: "scenario",
  id: "sc-x-001",
  use_case_id: "uc-x",
  sector: "Financial Services",
  title: "A Title",
  description: "One sentence.",
  narrative: null,
  evaluation_objective: null,
  direct_users: [
    { role: "analyst", characteristics: "shift-based" },
    { role: "auditor", characteristics: "" },
  ],
  indirect_users: [{ role: "customers", characteristics: "affected" }],
  intended_outcomes: ["faster triage"],
  benefits: ["less rework"],
  risks: [{ text: "wrong output accepted", category_id: "confabulation" }],
  kpis: ["median handle time"],
  stage_states: {
    stage1: "approved", stage2: "pending_review", stage3: "not_started",
  },
  feedback: {},
  revisions: [],
};

describe("editor payload mapping", () => {
  it("round-trips stage2 content through the form text", () => {
    const values = scenarioToFormValues("stage2", SCENARIO);
    expect(values.direct_users).toBe("analyst | shift-based\nauditor");
    expect(values.risks).toBe("[confabulation] wrong output accepted");
    const payload = formValuesToPayload("stage2", values);
    expect(payload.direct_users).toEqual([
      { role: "analyst", characteristics: "shift-based" },
      { role: "auditor", characteristics: "" },
    ]);
    expect(payload.risks).toEqual([
      { text: "wrong output accepted", category_id: "confabulation" },
    ]);
    expect(payload.intended_outcomes).toEqual(["faster triage"]);
  });

  it("keeps stage1 values verbatim", () => {
    const payload = formValuesToPayload("stage1", {
      title: " Edited Title ",
      description: "Edited sentence.",
    });
    expect(payload).toEqual({
      title: "Edited Title",
      description: "Edited sentence.",
    });
  });

  it("risk lines without a tag become empty category ids", () => {
    const payload = formValuesToPayload("stage2", {
      direct_users: "analyst",
      indirect_users: "customer",
      intended_outcomes: "o",
      benefits: "b",
      risks: "untagged risk line",
      kpis: "k",
    });
    expect(payload.risks).toEqual([
      { text: "untagged risk line", category_id: "" },
    ]);
  });
});

describe("finding anchors", () => {
  it("anchors indexed findings to their group", () => {
    expect(findingAnchor(
      { field: "risks[2].category_id", rule: "x", message: "m" })).toBe("risks");
    expect(findingAnchor(
      { field: "description", rule: "x", message: "m" })).toBe("description");
  });

  it("groups by anchor", () => {
    const grouped = groupFindings([
      { field: "risks[0].text", rule: "a", message: "m1" },
      { field: "risks[1].category_id", rule: "b", message: "m2" },
      { field: "title", rule: "c", message: "m3" },
    ]);
    expect(grouped.get("risks")).toHaveLength(2);
    expect(grouped.get("title")).toHaveLength(1);
  });
});

describe("ApiClient error mapping", () => {
  afterEach(() => {
    vi.unstubAllGlobals();
  });

  it("maps structured error bodies to ApiError", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => new Response(
      JSON.stringify({
        code: "validation",
        message: "edited payload failed validation",
        findings: [{ field: "description", rule: "one_sentence", message: "m" }],
      }),
      { status: 422, headers: { "Content-Type": "application/json" } })));
    const client = new ApiClient("http://service.test");
    let caught: unknown;
    try {
      await client.submitReview("sc-1", 1, "approve");
    } catch (error) {
      caught = error;
    }
    expect(caught).toBeInstanceOf(ApiError);
    const apiError = caught as ApiError;
    expect(apiError.status).toBe(422);
    expect(apiError.code).toBe("validation");
    expect(apiError.findings[0]?.rule).toBe("one_sentence");
  });

  it("sends reviewer header and remembers revisions for If-Match", async () => {
    const calls: { url: string; init: RequestInit }[] = [];
    vi.stubGlobal("fetch", vi.fn(async (url: string, init: RequestInit) => {
      calls.push({ url, init });
      if (url.endsWith("/reviews")) {
        return new Response(JSON.stringify({
          scenario_id: "sc-1", stage: "stage1",
          new_state: "approved", revision: 2,
        }), { status: 200, headers: { "Content-Type": "application/json" } });
      }
      return new Response(JSON.stringify({
        doc: { id: "sc-1" }, revision: 1,
      }), { status: 200, headers: { "Content-Type": "application/json" } });
    }));
    const client = new ApiClient("http://service.test", "alice");
    await client.getScenario("sc-1");
    await client.submitReview("sc-1", 1, "approve");
    const reviewCall = calls.find((c) => c.url.endsWith("/reviews"))!;
    const headers = new Headers(reviewCall.init.headers);
    expect(headers.get("X-Reviewer")).toBe("alice");
    expect(headers.get("If-Match")).toBe('"1"');
    expect(client.knownRevision("sc-1")).toBe(2);
  });
});
