// JSON shapes of the local service API, mirrored field for field.

export type SessionState =
  | "IDEATION"
  | "INSPIRED"
  | "TEMPLATED"
  | "REFINED"
  | "COLORED";

export interface SessionTransition {
  from: string;
  to: string;
  ts: string;
}

export interface SessionDoc {
  id: string;
  state: SessionState;
  prompts: string[];
  inspiration_ids: string[];
  selected_inspiration: string | null;
  selected_template: string | null;
  refined_sketch_hash: string | null;
  outputs: Record<string, unknown>[];
  created_at: string;
  updated_at: string;
  transitions: SessionTransition[];
}

export interface InspireRequest {
  session_id: string;
  prompt: string;
  seed: number;
  count: number;
  adapter_ids: string[];
  control_preset_id: string | null;
}

export interface InspireResponse {
  session: SessionDoc;
  artifact_ids: string[];
  cloud_job_id: string;
}

export interface LibraryBuildRequest {
  corpus_ids: string[] | null;
  designer_id: string;
}

export interface LibraryBuildResponse {
  job_id: string;
  generated: number;
  skipped: number;
  entries: string[];
  library_dir: string;
}

export interface RecommendRequest {
  session_id: string;
  artifact_id: string;
  k: number;
}

export interface TemplateCandidate {
  template_id: string;
  library_id: string;
  score: number;
}

export interface RecommendResponse {
  job_id: string;
  candidates: TemplateCandidate[];
}

export interface UploadSketchResponse {
  artifact_id: string;
  session: SessionDoc;
}

export interface TransferRequest {
  session_id: string;
  sketch_id: string;
  reference_id: string;
  steps: number;
  seed: number;
}

export interface TransferResponse {
  job_id: string;
  output_id: string;
  record: Record<string, unknown>;
  session: SessionDoc;
}

export interface AuditViolation {
  rule: string;
  request_id: string;
  url: string;
  note: string;
}

export interface AuditReport {
  passed: boolean;
  checked_requests: number;
  violations: AuditViolation[];
}

export const TRANSFER_STEP_CHOICES = [20, 50, 100, 200] as const;
export type TransferSteps = (typeof TRANSFER_STEP_CHOICES)[number];
