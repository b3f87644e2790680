/**
 * Story screen: renders a generated story chapter by chapter, with
 * per-chapter regeneration controls and a save-to-library action.
 *
 * Each chapter lives in its own `section#chapter-<n>`; regenerating a
 * chapter rebuilds only that section, leaving the rest of the page intact.
 */

import { ApiClient, StoryDoc } from "./api.js";
import { clear, el } from "./dom.js";

export interface StorySource {
  /** In-memory job id, set when the story came straight from generation. */
  jobId?: string;
  /** Library id, set once the story has been saved (or was loaded). */
  savedId?: number;
}

export class StoryView {
  private root: HTMLElement | null = null;
  private story: StoryDoc | null = null;
  private source: StorySource = {};

  constructor(
    private readonly api: ApiClient,
    private readonly onSaved?: (storyId: number) => void,
  ) {}

  mount(root: HTMLElement, story: StoryDoc, source: StorySource): void {
    this.root = root;
    this.story = story;
    this.source = source;
    this.render();
  }

  /** Id accepted by the regeneration endpoint for the current story. */
  private storyKey(): string | number {
    if (this.source.savedId !== undefined) return this.source.savedId;
    if (this.source.jobId !== undefined) return this.source.jobId;
    throw new Error("story has no server-side id");
  }

  async regenerate(
    chapter: number,
    target: "chapter" | "illustration",
  ): Promise<void> {
    if (!this.story) return;
    try {
      const updated = await this.api.regenerate(this.storyKey(), target, chapter);
      this.story = updated;
      const section = this.root?.querySelector(`#chapter-${chapter}`);
      const replacement = this.story.chapters.find((c) => c.number === chapter);
      if (section && replacement) {
        clear(section);
        this.fillChapterSection(section as HTMLElement, replacement);
      }
      this.setStatus("");
    } catch (error) {
      this.setStatus(`Regeneration failed: ${(error as Error).message}`);
    }
  }

  async save(): Promise<void> {
    if (!this.source.jobId || this.source.savedId !== undefined) return;
    try {
      const storyId = await this.api.saveStory(this.source.jobId);
      this.source = { ...this.source, savedId: storyId };
      this.render();
      this.onSaved?.(storyId);
    } catch (error) {
      this.setStatus(`Save failed: ${(error as Error).message}`);
    }
  }

  private setStatus(text: string): void {
    const status = this.root?.querySelector("#story-status");
    if (status) status.textContent = text;
  }

  private render(): void {
    if (!this.root || !this.story) return;
    clear(this.root);

    const header = el("header", { class: "story-header" });
    header.append(el("h1", { id: "story-title" }, this.story.title));
    if (this.story.preamble) {
      header.append(el("p", { class: "preamble" }, this.story.preamble));
    }

    const actions = el("div", { class: "story-actions" });
    if (this.source.savedId !== undefined) {
      actions.append(
        el(
          "a",
          { id: "permalink", href: `#/story/${this.source.savedId}` },
          `Saved as story ${this.source.savedId}`,
        ),
      );
    } else if (this.source.jobId) {
      const saveButton = el(
        "button",
        { id: "save-story", type: "button" },
        "Save story",
      );
      saveButton.addEventListener("click", () => void this.save());
      actions.append(saveButton);
    }
    actions.append(el("span", { id: "story-status", class: "story-status" }));

    this.root.append(header, actions);
    for (const chapter of this.story.chapters) {
      const section = el("section", {
        id: `chapter-${chapter.number}`,
        class: "chapter",
      });
      this.fillChapterSection(section, chapter);
      this.root.append(section);
    }
  }

  private fillChapterSection(
    section: HTMLElement,
    chapter: StoryDoc["chapters"][number],
  ): void {
    section.append(el("h2", {}, `Chapter ${chapter.number}: ${chapter.title}`));
    if (chapter.illustration?.image_ref) {
      section.append(
        el("img", {
          class: "illustration",
          src: this.api.mediaUrl(chapter.illustration.image_ref),
          alt: `Illustration for chapter ${chapter.number}`,
        }),
      );
    }
    for (const paragraph of chapter.body.split(/\n{2,}/)) {
      section.append(el("p", { class: "chapter-body" }, paragraph));
    }

    const regenText = el(
      "button",
      { type: "button", class: "regen-chapter" },
      "Regenerate text",
    );
    regenText.addEventListener(
      "click",
      () => void this.regenerate(chapter.number, "chapter"),
    );
    const regenImage = el(
      "button",
      { type: "button", class: "regen-illustration" },
      "Regenerate image",
    );
    regenImage.addEventListener(
      "click",
      () => void this.regenerate(chapter.number, "illustration"),
    );
    section.append(el("div", { class: "chapter-actions" }, regenText, regenImage));
  }
}
