/** Typed client for the review service. The UI talks to the documented
 * endpoints exclusively; this module is the only place that issues requests.
 *
 * The client remembers the last revision it saw per scenario and sends it as
 * If-Match on review posts, so concurrent edits surface as 409 conflicts the
 * views can recover from by reloading.
 */

import type {
  AssessmentDoc,
  CoverageReport,
  DocumentResponse,
  Finding,
  JobDoc,
  PendingItem,
  ReviewResult,
  RevisionDiff,
  RubricDefinition,
  ScenarioDoc,
  StageName,
  StatusSummary,
  VerdictName,
  WorksheetDoc,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly findings: Finding[];

  constructor(status: number, code: string, message: string,
              findings: Finding[] = []) {
    super(message);
    this.status = status;
    this.code = code;
    this.findings = findings;
  }
}

export interface ReviewOptions {
  comments?: string;
  editedPayload?: Record<string, unknown>;
  ifMatch?: number;
  idempotencyKey?: string;
}

export class ApiClient {
  readonly baseUrl: string;
  reviewer: string;
  private readonly revisions = new Map<string, number>();

  constructor(baseUrl = "", reviewer = "reviewer") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.reviewer = reviewer;
  }

  knownRevision(scenarioId: string): number | undefined {
    return this.revisions.get(scenarioId);
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers = new Headers(init.headers);
    headers.set("X-Reviewer", this.reviewer);
    if (init.body !== undefined) {
      headers.set("Content-Type", "application/json");
    }
    const response = await fetch(this.baseUrl + path, { ...init, headers });
    if (!response.ok) {
      let code = "error";
      let message = `${response.status} ${response.statusText}`;
      let findings: Finding[] = [];
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
        findings = body.findings ?? [];
      } catch {
        // non-JSON error body: keep the status line
      }
      throw new ApiError(response.status, code, message, findings);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  // -- use cases ---------------------------------------------------------

  async listUseCases(): Promise<DocumentResponse<WorksheetDoc>[]> {
    const body = await this.request<{ use_cases: DocumentResponse<WorksheetDoc>[] }>(
      "/api/use-cases");
    return body.use_cases;
  }

  async useCaseStatus(useCaseId: string): Promise<StatusSummary> {
    return this.request(`/api/use-cases/${encodeURIComponent(useCaseId)}/status`);
  }

  // -- expansion jobs -------------------------------------------------------

  async expand(useCaseId: string, stage: number, count?: number,
               seed?: number): Promise<string> {
    const body: Record<string, unknown> = { stage };
    if (count !== undefined) body.count = count;
    if (seed !== undefined) body.seed = seed;
    const result = await this.request<{ job_id: string }>(
      `/api/use-cases/${encodeURIComponent(useCaseId)}/expand`,
      { method: "POST", body: JSON.stringify(body) });
    return result.job_id;
  }

  async job(jobId: string): Promise<DocumentResponse<JobDoc>> {
    return this.request(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  async waitForJob(jobId: string, timeoutMs = 30_000,
                   intervalMs = 150): Promise<DocumentResponse<JobDoc>> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.job(jobId);
      const status = job.doc.status;
      if (status === "awaiting_review" || status === "completed"
          || status === "failed") {
        return job;
      }
      if (Date.now() > deadline) {
        throw new ApiError(0, "timeout", `job ${jobId} still ${status}`);
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }

  // -- review queue ---------------------------------------------------------

  async pendingReviews(filter: { stage?: number; useCase?: string } = {}):
      Promise<PendingItem[]> {
    const params = new URLSearchParams();
    if (filter.stage !== undefined) params.set("stage", String(filter.stage));
    if (filter.useCase) params.set("use_case", filter.useCase);
    const query = params.toString();
    const body = await this.request<{ pending: PendingItem[] }>(
      `/api/reviews/pending${query ? "?" + query : ""}`);
    return body.pending;
  }

  async getScenario(scenarioId: string): Promise<DocumentResponse<ScenarioDoc>> {
    const body = await this.request<DocumentResponse<ScenarioDoc>>(
      `/api/scenarios/${encodeURIComponent(scenarioId)}`);
    this.revisions.set(scenarioId, body.revision);
    return body;
  }

  async diff(scenarioId: string, from: number, to: number): Promise<RevisionDiff> {
    return this.request(
      `/api/scenarios/${encodeURIComponent(scenarioId)}/diff?from=${from}&to=${to}`);
  }

  async submitReview(scenarioId: string, stage: StageName | number,
                     verdict: VerdictName,
                     options: ReviewOptions = {}): Promise<ReviewResult> {
    const stageNumber = typeof stage === "number"
      ? stage : Number(stage.slice(-1));
    const headers: Record<string, string> = {};
    const ifMatch = options.ifMatch ?? this.revisions.get(scenarioId);
    if (ifMatch !== undefined) headers["If-Match"] = `"${ifMatch}"`;
    if (options.idempotencyKey) {
      headers["Idempotency-Key"] = options.idempotencyKey;
    }
    const body: Record<string, unknown> = {
      stage: stageNumber,
      verdict,
      comments: options.comments ?? "",
    };
    if (options.editedPayload !== undefined) {
      body.edited_payload = options.editedPayload;
    }
    const result = await this.request<ReviewResult>(
      `/api/scenarios/${encodeURIComponent(scenarioId)}/reviews`,
      { method: "POST", body: JSON.stringify(body), headers });
    this.revisions.set(scenarioId, result.revision);
    return result;
  }

  // -- rubric / coverage / export --------------------------------------------

  async rubric(): Promise<RubricDefinition> {
    return this.request("/api/rubric");
  }

  async scoreRubric(scenarioId: string, scores: Record<string, number>,
                    notes: Record<string, string> = {}): Promise<AssessmentDoc> {
    return this.request(
      `/api/scenarios/${encodeURIComponent(scenarioId)}/rubric`,
      { method: "POST", body: JSON.stringify({ scores, notes }) });
  }

  async coverage(useCase?: string): Promise<CoverageReport> {
    const query = useCase ? `?use_case=${encodeURIComponent(useCase)}` : "";
    return this.request(`/api/coverage${query}`);
  }

  exportUrl(format: "csv" | "md"): string {
    return `${this.baseUrl}/api/export/summary?format=${format}`;
  }
}
