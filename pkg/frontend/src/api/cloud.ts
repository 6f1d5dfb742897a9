import type { JsonTransport } from "./http";
import type { InspireRequest, InspireResponse } from "./types";

// Requests whose payloads travel on to the cloud role. The studio has no
// direct cloud connectivity; these calls hit the local service, which
// forwards them through its audited outbound channel. Everything here is
// JSON-only by construction: the transport type has no binary verbs, so
// sketch rasters cannot be attached to a cloud-bound call.

export const CLOUD_ROLE_ENDPOINTS: ReadonlyArray<{
  method: string;
  path: string;
}> = [{ method: "POST", path: "/v1/inspirations" }];

export class CloudProxyClient {
  constructor(private readonly transport: JsonTransport) {}

  requestInspirations(req: InspireRequest): Promise<InspireResponse> {
    return this.transport.postJson<InspireResponse>("/v1/inspirations", req);
  }
}
