import { ApiError } from "../api/http";
import type { TemplateCandidate } from "../api/types";
import { TRANSFER_STEP_CHOICES } from "../api/types";
import type { StudioController } from "../studio";
import { promptSubmittable } from "../studio";

// Stage panels map one-to-one onto the design workflow: compose a prompt,
// pick an inspiration, browse templates, refine on the canvas, preview the
// colored result. The server is authoritative; each panel re-renders from
// the controller's session projection after every call.

const ADAPTER_OPTIONS = ["bold-lines", "pastel-wash", "soft-grain"];
const PRESET_OPTIONS = [
  "",
  "silhouette-circle",
  "silhouette-square",
  "silhouette-triangle",
  "silhouette-diamond",
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}

export class StudioApp {
  readonly root = el("div", "studio");
  private readonly statusBar = el("div", "status");
  private readonly stateBadge = el("span", "badge", "—");

  // prompt panel
  readonly promptText = el("textarea", "prompt-text");
  readonly seedInput = el("input", "prompt-seed");
  readonly countInput = el("input", "prompt-count");
  readonly adapterBoxes = new Map<string, HTMLInputElement>();
  readonly presetSelect = el("select", "prompt-preset");
  readonly generateBtn = el("button", "generate", "Generate inspirations");

  // gallery and recommendations
  readonly gallery = el("div", "gallery");
  readonly kSlider = el("input", "k-slider");
  readonly strip = el("div", "strip");

  // canvas panel
  readonly canvasEl = el("canvas", "easel");
  readonly brushInput = el("input", "brush");
  readonly eraseToggle = el("input", "erase");
  readonly undoBtn = el("button", "", "Undo");
  readonly redoBtn = el("button", "", "Redo");
  readonly clearBtn = el("button", "", "Clear");
  readonly uploadBtn = el("button", "upload", "Upload refined sketch");

  // preview panel
  readonly stepBoxes = new Map<number, HTMLInputElement>();
  readonly previewSeed = el("input", "preview-seed");
  readonly previewBtn = el("button", "preview", "Render previews");
  readonly cards = el("div", "cards");
  readonly auditBtn = el("button", "audit", "Run privacy audit");

  private drawing = false;

  constructor(readonly controller: StudioController) {
    this.build();
    this.bind();
    this.renderSession();
  }

  private build(): void {
    const header = el("header");
    header.append(el("h1", "", "Design studio"), this.stateBadge);
    this.root.append(header, this.statusBar);

    const prompt = el("section", "panel prompt");
    prompt.append(el("h2", "", "1 · Describe the idea"));
    this.promptText.placeholder = "flowing summer dress, botanical print";
    this.seedInput.type = "number";
    this.seedInput.value = "7";
    this.countInput.type = "number";
    this.countInput.value = "4";
    for (const name of ADAPTER_OPTIONS) {
      const label = el("label", "adapter");
      const box = el("input");
      box.type = "checkbox";
      box.value = name;
      this.adapterBoxes.set(name, box);
      label.append(box, document.createTextNode(name));
      prompt.append(label);
    }
    for (const name of PRESET_OPTIONS) {
      const opt = el("option", "", name || "no silhouette preset");
      opt.value = name;
      this.presetSelect.append(opt);
    }
    prompt.append(this.promptText, this.seedInput, this.countInput, this.presetSelect, this.generateBtn);
    this.root.append(prompt);

    const inspire = el("section", "panel inspire");
    inspire.append(el("h2", "", "2 · Pick an inspiration"), this.gallery);
    this.kSlider.type = "range";
    this.kSlider.min = "1";
    this.kSlider.max = "20";
    this.kSlider.value = "10";
    inspire.append(el("label", "", "templates to fetch"), this.kSlider);
    this.root.append(inspire);

    const templates = el("section", "panel templates");
    templates.append(el("h2", "", "3 · Choose a template"), this.strip);
    this.root.append(templates);

    const refine = el("section", "panel refine");
    refine.append(el("h2", "", "4 · Refine the sketch"));
    this.brushInput.type = "number";
    this.brushInput.value = "3";
    this.eraseToggle.type = "checkbox";
    const eraseLabel = el("label", "", "erase");
    eraseLabel.prepend(this.eraseToggle);
    refine.append(this.canvasEl, this.brushInput, eraseLabel, this.undoBtn, this.redoBtn, this.clearBtn, this.uploadBtn);
    this.root.append(refine);

    const preview = el("section", "panel preview");
    preview.append(el("h2", "", "5 · Preview the coloring"));
    for (const steps of TRANSFER_STEP_CHOICES) {
      const label = el("label", "steps");
      const box = el("input");
      box.type = "checkbox";
      box.value = String(steps);
      box.checked = true;
      this.stepBoxes.set(steps, box);
      label.append(box, document.createTextNode(`${steps} steps`));
      preview.append(label);
    }
    this.previewSeed.type = "number";
    this.previewSeed.value = "0";
    preview.append(this.previewSeed, this.previewBtn, this.cards, this.auditBtn);
    this.root.append(preview);
  }

  private bind(): void {
    this.promptText.addEventListener("input", () => this.syncPromptGuard());
    this.generateBtn.addEventListener("click", () => {
      void this.run(async () => {
        const resp = await this.controller.composePrompt(this.readPromptForm());
        this.renderGallery(resp.artifact_ids);
      });
    });

    this.canvasEl.addEventListener("pointerdown", (e) => {
      const doc = this.controller.canvas;
      if (!doc) return;
      this.drawing = true;
      doc.beginStroke(
        this.canvasPoint(e),
        Number(this.brushInput.value) || 1,
        this.eraseToggle.checked,
      );
      this.paintCanvas();
    });
    this.canvasEl.addEventListener("pointermove", (e) => {
      const doc = this.controller.canvas;
      if (!doc || !this.drawing) return;
      doc.extendStroke(this.canvasPoint(e));
      this.paintCanvas();
    });
    this.canvasEl.addEventListener("pointerup", () => {
      this.controller.canvas?.endStroke();
      this.drawing = false;
    });

    this.undoBtn.addEventListener("click", () => {
      this.controller.canvas?.undo();
      this.paintCanvas();
    });
    this.redoBtn.addEventListener("click", () => {
      this.controller.canvas?.redo();
      this.paintCanvas();
    });
    this.clearBtn.addEventListener("click", () => {
      this.controller.canvas?.clear();
      this.paintCanvas();
    });
    this.uploadBtn.addEventListener("click", () => {
      void this.run(async () => {
        const id = await this.controller.uploadRefinedSketch();
        this.note(`refined sketch stored as ${id.slice(0, 12)}…`);
      });
    });

    this.previewBtn.addEventListener("click", () => {
      void this.run(async () => {
        const steps = [...this.stepBoxes.entries()]
          .filter(([, box]) => box.checked)
          .map(([n]) => n);
        const cards = await this.controller.previewTransfers(
          steps,
          Number(this.previewSeed.value) || 0,
        );
        this.renderCards(cards.map((c) => ({ ...c })));
      });
    });
    this.auditBtn.addEventListener("click", () => {
      void this.run(async () => {
        const report = await this.controller.audit();
        this.note(`privacy audit: ${report.passed ? "PASS" : "FAIL"} over ${report.checked_requests} requests`);
      });
    });
  }

  readPromptForm() {
    return {
      text: this.promptText.value,
      adapterIds: [...this.adapterBoxes.entries()]
        .filter(([, box]) => box.checked)
        .map(([name]) => name),
      controlPresetId: this.presetSelect.value || null,
      seed: Number(this.seedInput.value) || 0,
      count: Number(this.countInput.value) || 1,
    };
  }

  syncPromptGuard(): void {
    this.generateBtn.disabled = !promptSubmittable({ text: this.promptText.value });
  }

  private canvasPoint(e: PointerEvent): { x: number; y: number } {
    const rect = this.canvasEl.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  renderSession(): void {
    const session = this.controller.session;
    this.stateBadge.textContent = session ? `${session.state} · ${session.id.slice(0, 8)}` : "no session";
    this.syncPromptGuard();
  }

  renderGallery(artifactIds: string[]): void {
    this.gallery.textContent = "";
    for (const id of artifactIds) {
      const card = el("button", "thumb", id.slice(0, 10));
      card.dataset.artifactId = id;
      card.addEventListener("click", () => {
        void this.run(async () => {
          const candidates = await this.controller.pickInspiration(
            id,
            Number(this.kSlider.value),
          );
          this.renderStrip(candidates);
        });
      });
      this.gallery.append(card);
    }
    this.renderSession();
  }

  renderStrip(candidates: TemplateCandidate[]): void {
    this.strip.textContent = "";
    for (const c of candidates) {
      const card = el("button", "template", `${c.library_id} · ${c.score.toFixed(3)}`);
      card.dataset.templateId = c.template_id;
      card.addEventListener("click", () => {
        void this.run(async () => {
          await this.controller.chooseTemplate(c.template_id);
          this.resizeCanvas();
          this.paintCanvas();
        });
      });
      this.strip.append(card);
    }
    this.renderSession();
  }

  renderCards(cards: { steps: number; wallMs: number; outputId: string }[]): void {
    this.cards.textContent = "";
    for (const c of cards) {
      const card = el("div", "card");
      card.dataset.outputId = c.outputId;
      card.append(
        el("div", "card-steps", `${c.steps} steps`),
        el("div", "card-wall", `${c.wallMs.toFixed(1)} ms`),
        el("div", "card-output", c.outputId.slice(0, 12)),
      );
      const promote = el("button", "promote", "Use this one");
      promote.addEventListener("click", () => {
        this.controller.promote(c.outputId);
        this.note(`promoted ${c.outputId.slice(0, 12)}…`);
      });
      card.append(promote);
      this.cards.append(card);
    }
    this.renderSession();
  }

  private resizeCanvas(): void {
    const doc = this.controller.canvas;
    if (!doc) return;
    this.canvasEl.width = doc.width;
    this.canvasEl.height = doc.height;
  }

  // Display only; the uploaded raster comes from the software rasterizer.
  paintCanvas(): void {
    const doc = this.controller.canvas;
    const ctx = this.canvasEl.getContext?.("2d");
    if (!doc || !ctx) return;
    const raster = doc.exportRaster();
    const image = ctx.createImageData(raster.width, raster.height);
    for (let i = 0; i < raster.pixels.length; i++) {
      const v = raster.pixels[i]!;
      image.data[i * 4] = v;
      image.data[i * 4 + 1] = v;
      image.data[i * 4 + 2] = v;
      image.data[i * 4 + 3] = 255;
    }
    ctx.putImageData(image, 0, 0);
  }

  note(text: string): void {
    this.statusBar.textContent = text;
    this.renderSession();
  }

  private async run(op: () => Promise<void>): Promise<void> {
    try {
      await op();
      this.statusBar.classList.remove("error");
      this.renderSession();
    } catch (err) {
      this.statusBar.classList.add("error");
      this.statusBar.textContent = describe(err);
      this.renderSession();
    }
  }
}
