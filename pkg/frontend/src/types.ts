/** Shapes of service payloads. Field names mirror the document contract. */

export interface UserDescriptor {
  role: string;
  characteristics: string;
}

export interface TaggedRisk {
  text: string;
  category_id: string;
}

export type StageName = "stage1" | "stage2" | "stage3";
export type StageStateName =
  | "not_started"
  | "drafted"
  | "pending_review"
  | "changes_requested"
  | "approved"
  | "rejected";

export type VerdictName =
  | "approve"
  | "edit_and_approve"
  | "request_regeneration"
  | "reject";

export interface RevisionRecord {
  index: number;
  stage: StageName;
  origin: "generated" | "human_edited";
  prompt_fingerprint: string | null;
  timestamp: string;
  payload: Record<string, unknown>;
}

export interface ScenarioDoc {
  kind: "scenario";
  id: string;
  use_case_id: string;
  sector: string;
  title: string;
  description: string;
  narrative: string | null;
  evaluation_objective: string | null;
  direct_users: UserDescriptor[];
  indirect_users: UserDescriptor[];
  intended_outcomes: string[];
  benefits: string[];
  risks: TaggedRisk[];
  kpis: string[];
  stage_states: Record<StageName, StageStateName>;
  feedback: Partial<Record<StageName, string>>;
  revisions: RevisionRecord[];
}

export interface WorksheetDoc {
  kind: "use_case_worksheet";
  id: string;
  name: string;
  sector: string;
  sub_sectors: string[];
  summary: string;
  direct_users: UserDescriptor[];
  indirect_users: UserDescriptor[];
  intended_outcomes: string[];
  positive_impacts: string[];
  negative_impacts: string[];
  kpis: string[];
}

export interface JobDoc {
  kind: "expansion_job";
  id: string;
  use_case_id: string;
  stage: StageName;
  status: "queued" | "running" | "awaiting_review" | "completed" | "failed";
  target_count: number | null;
  attempts: number;
  backend_id: string;
  detail: string;
  scenario_ids: string[];
  created_at: string;
}

export interface DocumentResponse<T> {
  doc: T;
  revision: number;
  effective_status?: string;
}

export interface PendingItem {
  scenario_id: string;
  use_case_id: string;
  stage: StageName;
  pending_since: string;
  title: string;
}

export interface StatusSummary {
  use_case_id: string;
  total_scenarios: number;
  per_stage: Record<StageName, Record<StageStateName, number>>;
}

export interface CoverageReport {
  total_scenarios: number;
  floor: number;
  counts: Record<string, number>;
  flagged: string[];
  per_use_case: Record<string, Record<string, number>>;
}

export interface RubricCategory {
  id: string;
  name: string;
  guiding_questions: string[];
  autochecks: string[];
}

export interface RubricDefinition {
  kind: "rubric_definition";
  categories: RubricCategory[];
  scale_max: number;
  weights: Record<string, number>;
  readiness_threshold: number;
  narrative_min_chars: number;
  mandatory_autochecks: string[];
}

export interface AssessmentDoc {
  kind: "rubric_assessment";
  id: string;
  scenario_id: string;
  per_category: Record<
    string,
    { auto_findings: string[]; human_score: number | null; notes: string }
  >;
  weighted_score: number;
  verdict: "ready" | "not_ready";
  assessed_by: string;
  timestamp: string;
}

export interface Finding {
  field: string;
  rule: string;
  message: string;
}

export interface ReviewResult {
  scenario_id: string;
  stage: StageName;
  new_state: StageStateName;
  revision: number;
}

export interface RevisionDiff {
  scenario_id: string;
  from_index: number;
  to_index: number;
  from_stage: StageName;
  to_stage: StageName;
  changes: { field: string; from: unknown; to: unknown }[];
}

export const STAGE_LABELS: Record<StageName, string> = {
  stage1: "Stage 1 · Title & Description",
  stage2: "Stage 2 · Elements",
  stage3: "Stage 3 · Narrative & Objective",
};

export const STATE_LABELS: Record<StageStateName, string> = {
  not_started: "Not started",
  drafted: "Drafted",
  pending_review: "Pending review",
  changes_requested: "Changes requested",
  approved: "Approved",
  rejected: "Rejected",
};
