/**
 * Library screen: grid of saved stories, newest first, with open and
 * delete actions and an empty-state message.
 */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";

export class LibraryView {
  private root: HTMLElement | null = null;

  constructor(private readonly api: ApiClient) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.root) return;
    const entries = await this.api.listLibrary();
    clear(this.root);
    this.root.append(el("h1", {}, "Library"));

    if (entries.length === 0) {
      this.root.append(
        el("p", { id: "library-empty" }, "No saved stories yet."),
      );
      return;
    }

    const grid = el("div", { id: "library-grid", class: "library-grid" });
    for (const entry of entries) {
      const card = el("article", {
        class: "library-card",
        "data-story-id": String(entry.id),
      });
      if (entry.thumbnail_ref) {
        card.append(
          el("img", {
            class: "library-thumb",
            src: this.api.mediaUrl(entry.thumbnail_ref),
            alt: entry.title,
          }),
        );
      }
      card.append(
        el(
          "a",
          { class: "library-title", href: `#/story/${entry.id}` },
          entry.title,
        ),
        el(
          "p",
          { class: "library-meta" },
          `${entry.chapter_count} chapter${entry.chapter_count === 1 ? "" : "s"}`,
        ),
      );
      const deleteButton = el(
        "button",
        { type: "button", class: "delete-story" },
        "Delete",
      );
      deleteButton.addEventListener("click", () => {
        void this.api.deleteStory(entry.id).then(() => this.refresh());
      });
      card.append(deleteButton);
      grid.append(card);
    }
    this.root.append(grid);
  }
}
