import { ApiClient, ApiError } from "./api.js";
import type { PatchDetail, QueueFilters, QueueItemView, StatsResponse } from "./types.js";
import { NO_FILTERS } from "./types.js";
import {
  applyFilters,
  filterOptions,
  renderBanner,
  renderDetail,
  renderFilterBar,
  renderQueue,
  renderStats,
} from "./views.js";

interface AppState {
  items: QueueItemView[]; // pending queue, server order
  filters: QueueFilters;
  selected: PatchDetail | null;
  proposal: string | null; // branch name once proposed
  banner: string | null;
  stats: StatsResponse | null;
}

export class App {
  state: AppState = {
    items: [],
    filters: { ...NO_FILTERS },
    selected: null,
    proposal: null,
    banner: null,
    stats: null,
  };

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private analystId: string = "analyst",
  ) {}

  async init(): Promise<void> {
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("change", (event) => this.onChange(event));
    await this.load();
  }

  // full server refresh: reload always reproduces server truth
  async load(): Promise<void> {
    try {
      const [items, stats] = await Promise.all([
        this.api.listPatches("pending"),
        this.api.getStats(),
      ]);
      this.state.items = items;
      this.state.stats = stats;
      this.state.banner = null;
      if (this.state.selected) {
        await this.refreshSelected(this.state.selected.patch_id);
      }
    } catch (err) {
      this.state.banner = err instanceof ApiError ? err.message : String(err);
    }
    this.render();
  }

  private async refreshSelected(patchId: string): Promise<void> {
    try {
      this.state.selected = await this.api.getPatch(patchId);
    } catch {
      this.state.selected = null;
    }
  }

  async select(patchId: string): Promise<void> {
    try {
      this.state.selected = await this.api.getPatch(patchId);
      this.state.proposal = null;
      this.state.banner = null;
    } catch (err) {
      this.state.banner = err instanceof ApiError ? err.message : String(err);
    }
    this.render();
  }

  async submitVerdict(verdict: string, note: string): Promise<void> {
    const selected = this.state.selected;
    if (!selected || this.state.banner) return; // no writes while the API is down
    const snapshotItems = this.state.items;
    const snapshotSelected = selected;
    // optimistic: the row leaves the pending list, the detail shows the verdict
    this.state.items = this.state.items.filter((i) => i.patch_id !== selected.patch_id);
    this.state.selected = { ...selected, verdict };
    this.render();
    try {
      await this.api.postVerdict(selected.patch_id, verdict, this.analystId, note);
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        // someone else decided first: converge to server state
        this.state.items = snapshotItems;
        this.state.selected = snapshotSelected;
        await this.load();
        return;
      }
      this.state.items = snapshotItems;
      this.state.selected = snapshotSelected;
      this.state.banner = err instanceof ApiError ? err.message : String(err);
      this.render();
      return;
    }
    await this.load();
  }

  async propose(): Promise<void> {
    const selected = this.state.selected;
    if (!selected || selected.verdict !== "correct") return; // mirrors the API rule
    try {
      const proposal = await this.api.postPropose(selected.patch_id, this.analystId);
      this.state.proposal = proposal.branch;
    } catch (err) {
      this.state.banner = err instanceof ApiError ? err.message : String(err);
    }
    this.render();
  }

  setFilter(name: keyof QueueFilters, value: string): void {
    this.state.filters = { ...this.state.filters, [name]: value };
    this.render();
  }

  visibleItems(): QueueItemView[] {
    return applyFilters(this.state.items, this.state.filters);
  }

  private onClick(event: Event): void {
    const target = event.target as HTMLElement;
    const row = target.closest<HTMLElement>(".queue-row");
    if (row?.dataset.patchId) {
      void this.select(row.dataset.patchId);
      return;
    }
    if (target.id === "retry") {
      void this.load();
      return;
    }
    if (target.id === "propose" && !(target as HTMLButtonElement).disabled) {
      void this.propose();
      return;
    }
    const verdict = target.dataset.verdict;
    if (verdict) {
      const note =
        this.root.querySelector<HTMLInputElement>("#verdict-note")?.value ?? "";
      void this.submitVerdict(verdict, note);
    }
  }

  private onChange(event: Event): void {
    const target = event.target as HTMLElement;
    const filter = target.dataset.filter as keyof QueueFilters | undefined;
    if (filter && target instanceof HTMLSelectElement) {
      this.setFilter(filter, target.value);
    }
  }

  render(): void {
    const visible = this.visibleItems();
    const bannerHtml = renderBanner(this.state.banner);
    const statsHtml = renderStats(this.state.stats);
    const filterHtml = renderFilterBar(filterOptions(this.state.items), this.state.filters);
    const queueHtml = renderQueue(visible, this.state.selected?.patch_id ?? null);
    const detailHtml = this.state.selected
      ? renderDetail(this.state.selected, this.state.proposal)
      : `<div class="empty-state">Select a patch to inspect its diff.</div>`;
    this.root.innerHTML = `
${bannerHtml}
<header class="topbar"><h1>patch triage</h1>${statsHtml}</header>
${filterHtml}
<main class="layout">
  <section class="pane pane-queue">${queueHtml}</section>
  <section class="pane pane-detail">${detailHtml}</section>
</main>`;
  }
}
