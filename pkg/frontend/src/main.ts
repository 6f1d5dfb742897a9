import { JsonTransport, RasterTransport } from "./api/http";
import { CloudProxyClient } from "./api/cloud";
import { LocalStudioClient } from "./api/local";
import { StudioController } from "./studio";
import { StudioApp } from "./ui/app";

// Entry point. Everything talks to the local service origin; inspiration
// requests are forwarded to the cloud by the local role, never by the
// browser, so the audit log sees all outbound traffic.

const base = window.location.origin;
const fetchImpl = (url: string, init?: RequestInit) => window.fetch(url, init);

const cloud = new CloudProxyClient(new JsonTransport(base, fetchImpl));
const local = new LocalStudioClient(new RasterTransport(base, fetchImpl));
const controller = new StudioController(cloud, local, () => performance.now());
const app = new StudioApp(controller);

document.body.append(app.root);
void controller.start().then(() => app.renderSession());
