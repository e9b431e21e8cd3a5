// Payload shapes mirrored from the triage API, field for field. The client
// never derives flags or verdict state on its own.

export interface QueueItemView {
  patch_id: string;
  project: string;
  build_id: string;
  build_link: string;
  tool: string;
  diff: string;
  flags: string[];
  age_seconds: number;
  verdict: string; // "pending" | "correct" | "overfitting" | "duplicate_human_fix"
  created_at: string;
  note: string;
}

export interface PatchDetail extends QueueItemView {
  build: Record<string, unknown> | null;
}

export interface VerdictResponse {
  patch_id: string;
  verdict: string;
  analyst_id: string;
  note: string;
  decided_at: string;
}

export interface ProposalResponse {
  patch_id: string;
  branch: string;
  clone: string;
  description: string;
}

export interface StatsResponse {
  builds_collected: number;
  ci_failing: number;
  interesting: number;
  outcomes: Record<string, number>;
  patches_found: number;
  pending: number;
}

export interface QueueFilters {
  project: string; // "" = all
  tool: string;
  flag: string;
}

export const NO_FILTERS: QueueFilters = { project: "", tool: "", flag: "" };

export const VERDICTS = ["correct", "overfitting", "duplicate_human_fix"] as const;
