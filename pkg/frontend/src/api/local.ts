import type { RasterTransport } from "./http";
import type {
  AuditReport,
  LibraryBuildResponse,
  RecommendResponse,
  SessionDoc,
  TransferRequest,
  TransferResponse,
  UploadSketchResponse,
} from "./types";

// Everything that stays on the designer's machine: sessions, the template
// library, recommendations, raster upload, transfers, artifact downloads.
// This is the only client with binary verbs.

export class LocalStudioClient {
  constructor(private readonly transport: RasterTransport) {}

  createSession(): Promise<SessionDoc> {
    return this.transport.postJson<SessionDoc>("/v1/sessions");
  }

  session(sessionId: string): Promise<SessionDoc> {
    return this.transport.getJson<SessionDoc>(`/v1/sessions/${sessionId}`);
  }

  selectInspiration(sessionId: string, artifactId: string): Promise<SessionDoc> {
    return this.transport.postJson<SessionDoc>(
      `/v1/sessions/${sessionId}/selection`,
      { artifact_id: artifactId },
    );
  }

  selectTemplate(sessionId: string, templateId: string): Promise<SessionDoc> {
    return this.transport.postJson<SessionDoc>(
      `/v1/sessions/${sessionId}/template`,
      { template_id: templateId },
    );
  }

  jumpBack(sessionId: string, target: string): Promise<SessionDoc> {
    return this.transport.postJson<SessionDoc>(`/v1/sessions/${sessionId}/back`, {
      target,
    });
  }

  buildLibrary(designerId = "designer"): Promise<LibraryBuildResponse> {
    return this.transport.postJson<LibraryBuildResponse>("/v1/library/build", {
      corpus_ids: null,
      designer_id: designerId,
    });
  }

  recommend(sessionId: string, artifactId: string, k: number): Promise<RecommendResponse> {
    return this.transport.postJson<RecommendResponse>("/v1/recommendations", {
      session_id: sessionId,
      artifact_id: artifactId,
      k,
    });
  }

  uploadSketch(sessionId: string, png: Uint8Array): Promise<UploadSketchResponse> {
    const query = new URLSearchParams({ session_id: sessionId });
    return this.transport.postBytes<UploadSketchResponse>(
      `/v1/sketches?${query}`,
      png,
      "image/png",
    );
  }

  requestTransfer(req: TransferRequest): Promise<TransferResponse> {
    return this.transport.postJson<TransferResponse>("/v1/transfers", req);
  }

  fetchArtifact(artifactId: string): Promise<Uint8Array> {
    return this.transport.getBytes(`/v1/artifacts/${artifactId}`);
  }

  auditReport(): Promise<AuditReport> {
    return this.transport.postJson<AuditReport>("/v1/audit/verify");
  }
}
