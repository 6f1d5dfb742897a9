// Transport layer. JsonTransport carries JSON both ways and nothing else;
// RasterTransport adds the binary verbs. The cloud-facing client is built
// on JsonTransport alone, so no raster payload can reach a cloud-bound
// call without failing to compile.

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    method: string,
    path: string,
  ) {
    super(`${method} ${path} -> ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function readDetail(resp: Response): Promise<string> {
  const text = await resp.text();
  try {
    const doc = JSON.parse(text);
    if (doc && typeof doc.detail === "string") return doc.detail;
  } catch {
    // non-JSON error body; fall through to the raw text
  }
  return text;
}

async function ensureOk(resp: Response, method: string, path: string): Promise<Response> {
  if (resp.status >= 400) {
    throw new ApiError(resp.status, await readDetail(resp), method, path);
  }
  return resp;
}

export class JsonTransport {
  constructor(
    readonly baseUrl: string,
    protected readonly fetchImpl: FetchLike,
  ) {}

  protected url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), { method: "GET" });
    return (await ensureOk(resp, "GET", path)).json() as Promise<T>;
  }

  async postJson<T>(path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return (await ensureOk(resp, "POST", path)).json() as Promise<T>;
  }
}

export class RasterTransport extends JsonTransport {
  async postBytes<T>(
    path: string,
    bytes: Uint8Array,
    contentType: string,
  ): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": contentType },
      body: bytes as unknown as BodyInit,
    });
    return (await ensureOk(resp, "POST", path)).json() as Promise<T>;
  }

  async getBytes(path: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.url(path), { method: "GET" });
    await ensureOk(resp, "GET", path);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
