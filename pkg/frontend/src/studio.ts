import type { CloudProxyClient } from "./api/cloud";
import type { LocalStudioClient } from "./api/local";
import type {
  InspireResponse,
  SessionDoc,
  TemplateCandidate,
  TransferResponse,
} from "./api/types";
import { TRANSFER_STEP_CHOICES } from "./api/types";
import { CanvasDocument } from "./canvasdoc";
import { decodePngToGray } from "./png";

export interface PromptForm {
  text: string;
  adapterIds: string[];
  controlPresetId: string | null;
  seed: number;
  count: number;
}

export interface PreviewCard {
  steps: number;
  seed: number;
  outputId: string;
  wallMs: number;
  record: Record<string, unknown>;
}

export type Clock = () => number;

export function promptSubmittable(form: Pick<PromptForm, "text">): boolean {
  return form.text.trim().length > 0;
}

// One designer run against the local service. The server owns the session;
// every view field here is a cached projection of the latest GET, and every
// mutating call refreshes that projection first so a stale tab cannot act
// on an outdated state.
export class StudioController {
  session: SessionDoc | null = null;
  candidates: TemplateCandidate[] = [];
  canvas: CanvasDocument | null = null;
  previews: PreviewCard[] = [];
  promotedOutputId: string | null = null;

  constructor(
    private readonly cloud: CloudProxyClient,
    private readonly local: LocalStudioClient,
    private readonly clock: Clock = () => Date.now(),
  ) {}

  private need(): SessionDoc {
    if (!this.session) throw new Error("no active session");
    return this.session;
  }

  async start(): Promise<SessionDoc> {
    this.session = await this.local.createSession();
    return this.session;
  }

  async refresh(): Promise<SessionDoc> {
    this.session = await this.local.session(this.need().id);
    return this.session;
  }

  async composePrompt(form: PromptForm): Promise<InspireResponse> {
    if (!promptSubmittable(form)) {
      throw new Error("prompt text is empty; submit stays disabled");
    }
    await this.refresh();
    const resp = await this.cloud.requestInspirations({
      session_id: this.need().id,
      prompt: form.text,
      seed: form.seed,
      count: form.count,
      adapter_ids: form.adapterIds,
      control_preset_id: form.controlPresetId,
    });
    this.session = resp.session;
    return resp;
  }

  async pickInspiration(artifactId: string, k: number): Promise<TemplateCandidate[]> {
    await this.refresh();
    this.session = await this.local.selectInspiration(this.need().id, artifactId);
    const recs = await this.local.recommend(this.need().id, artifactId, k);
    this.candidates = recs.candidates;
    return this.candidates;
  }

  async chooseTemplate(templateId: string): Promise<CanvasDocument> {
    await this.refresh();
    this.session = await this.local.selectTemplate(this.need().id, templateId);
    const png = await this.local.fetchArtifact(templateId);
    const background = await decodePngToGray(png);
    this.canvas = new CanvasDocument(templateId, background);
    return this.canvas;
  }

  async uploadRefinedSketch(): Promise<string> {
    if (!this.canvas) throw new Error("no template selected");
    await this.refresh();
    const png = this.canvas.exportPng();
    const resp = await this.local.uploadSketch(this.need().id, png);
    this.session = resp.session;
    return resp.artifact_id;
  }

  async previewTransfers(stepCounts: readonly number[], seed: number): Promise<PreviewCard[]> {
    for (const steps of stepCounts) {
      if (!TRANSFER_STEP_CHOICES.includes(steps as 20 | 50 | 100 | 200)) {
        throw new Error(`steps must be one of ${TRANSFER_STEP_CHOICES.join(", ")}`);
      }
    }
    await this.refresh();
    const session = this.need();
    if (!session.refined_sketch_hash || !session.selected_inspiration) {
      throw new Error("transfer preview needs a refined sketch and a selected inspiration");
    }
    const cards: PreviewCard[] = [];
    for (const steps of stepCounts) {
      const t0 = this.clock();
      const resp: TransferResponse = await this.local.requestTransfer({
        session_id: session.id,
        sketch_id: session.refined_sketch_hash,
        reference_id: session.selected_inspiration,
        steps,
        seed,
      });
      cards.push({
        steps,
        seed,
        outputId: resp.output_id,
        wallMs: this.clock() - t0,
        record: resp.record,
      });
      this.session = resp.session;
    }
    this.previews = cards;
    return cards;
  }

  promote(outputId: string): void {
    if (!this.previews.some((c) => c.outputId === outputId)) {
      throw new Error(`no preview with output ${outputId}`);
    }
    this.promotedOutputId = outputId;
  }

  audit(): ReturnType<LocalStudioClient["auditReport"]> {
    return this.local.auditReport();
  }
}
