// Pure render helpers: state in, HTML string out. Keeping these free of DOM
// access makes the ordering/filtering/diff rules directly testable.

import type { PatchDetail, QueueFilters, QueueItemView, StatsResponse } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function applyFilters(items: QueueItemView[], filters: QueueFilters): QueueItemView[] {
  // server order is preserved: filtering only removes rows
  return items.filter((item) => {
    if (filters.project && item.project !== filters.project) return false;
    if (filters.tool && item.tool !== filters.tool) return false;
    if (filters.flag && !item.flags.includes(filters.flag)) return false;
    return true;
  });
}

export function filterOptions(items: QueueItemView[]): {
  projects: string[];
  tools: string[];
  flags: string[];
} {
  const projects = new Set<string>();
  const tools = new Set<string>();
  const flags = new Set<string>();
  for (const item of items) {
    projects.add(item.project);
    tools.add(item.tool);
    for (const flag of item.flags) flags.add(flag);
  }
  return {
    projects: [...projects].sort(),
    tools: [...tools].sort(),
    flags: [...flags].sort(),
  };
}

export function formatAge(seconds: number): string {
  if (seconds < 120) return `${seconds}s`;
  if (seconds < 7200) return `${Math.floor(seconds / 60)}m`;
  if (seconds < 172800) return `${Math.floor(seconds / 3600)}h`;
  return `${Math.floor(seconds / 86400)}d`;
}

export function renderFlags(flags: string[]): string {
  if (flags.length === 0) return `<span class="flag flag-clean">no flags</span>`;
  return flags
    .map((flag) => `<span class="flag flag-warn">${escapeHtml(flag)}</span>`)
    .join(" ");
}

export function renderQueue(items: QueueItemView[], selected: string | null): string {
  if (items.length === 0) {
    return `<div class="empty-state">No pending patches. The queue is clear.</div>`;
  }
  const rows = items
    .map((item) => {
      const active = item.patch_id === selected ? " selected" : "";
      return `<tr class="queue-row${active}" data-patch-id="${escapeHtml(item.patch_id)}">
  <td class="mono">${escapeHtml(item.project)}</td>
  <td class="mono">${escapeHtml(item.tool)}</td>
  <td>${renderFlags(item.flags)}</td>
  <td class="muted">${formatAge(item.age_seconds)}</td>
</tr>`;
    })
    .join("\n");
  return `<table class="queue">
<thead><tr><th>project</th><th>tool</th><th>flags</th><th>age</th></tr></thead>
<tbody>
${rows}
</tbody>
</table>`;
}

export function renderDiff(diff: string): string {
  // plain unified diff with syntax-neutral line classes
  const lines = diff.replace(/\n$/, "").split("\n");
  const body = lines
    .map((line) => {
      let klass = "ctx";
      if (line.startsWith("+++") || line.startsWith("---")) klass = "meta";
      else if (line.startsWith("@@")) klass = "hunk";
      else if (line.startsWith("+")) klass = "add";
      else if (line.startsWith("-")) klass = "del";
      else if (line.startsWith("\\")) klass = "meta";
      return `<span class="diff-${klass}">${escapeHtml(line)}</span>`;
    })
    .join("\n");
  return `<pre class="diff">${body}</pre>`;
}

export function renderDetail(item: PatchDetail, proposal: string | null): string {
  const decided = item.verdict !== "pending";
  const canPropose = item.verdict === "correct";
  const verdictButtons = decided
    ? `<div class="verdict-state">verdict: <strong>${escapeHtml(item.verdict)}</strong></div>`
    : `<div class="verdict-buttons">
  <input type="text" id="verdict-note" placeholder="note (optional)" />
  <button data-verdict="correct">correct</button>
  <button data-verdict="overfitting">overfitting</button>
  <button data-verdict="duplicate_human_fix">duplicate of human fix</button>
</div>`;
  const proposeBlock = canPropose
    ? `<button id="propose" ${proposal ? "disabled" : ""}>propose to developers</button>`
    : `<button id="propose" disabled title="propose requires verdict=correct">propose to developers</button>`;
  const proposalNote = proposal
    ? `<div class="proposal-note">proposed on branch <code>${escapeHtml(proposal)}</code></div>`
    : "";
  return `<div class="detail" data-patch-id="${escapeHtml(item.patch_id)}">
<h2 class="mono">${escapeHtml(item.patch_id)}</h2>
<dl class="context">
  <dt>project</dt><dd class="mono">${escapeHtml(item.project)}</dd>
  <dt>build</dt><dd class="mono" title="${escapeHtml(item.build_link)}">${escapeHtml(item.build_id)}</dd>
  <dt>tool</dt><dd class="mono">${escapeHtml(item.tool)}</dd>
  <dt>strategy</dt><dd>${escapeHtml(item.note)}</dd>
  <dt>flags</dt><dd>${renderFlags(item.flags)}</dd>
</dl>
${renderDiff(item.diff)}
${verdictButtons}
${proposeBlock}
${proposalNote}
</div>`;
}

export function renderBanner(message: string | null): string {
  if (!message) return "";
  return `<div class="banner">
  <span>${escapeHtml(message)}</span>
  <button id="retry">retry</button>
</div>`;
}

export function renderStats(stats: StatsResponse | null): string {
  if (!stats) return "";
  const outcomes = Object.entries(stats.outcomes)
    .filter(([, count]) => count > 0)
    .map(([bucket, count]) => `${escapeHtml(bucket)}: ${count}`)
    .join(" · ");
  return `<div class="stats-card">
  <span>${stats.pending} pending</span>
  <span>${stats.patches_found} adequate patches</span>
  <span>${stats.interesting} of ${stats.builds_collected} builds interesting</span>
  <span class="muted">${outcomes}</span>
</div>`;
}

export function renderFilterBar(
  options: { projects: string[]; tools: string[]; flags: string[] },
  filters: QueueFilters,
): string {
  const select = (name: keyof QueueFilters, label: string, values: string[]) => {
    const opts = values
      .map((value) => {
        const chosen = filters[name] === value ? " selected" : "";
        return `<option value="${escapeHtml(value)}"${chosen}>${escapeHtml(value)}</option>`;
      })
      .join("");
    return `<label>${label}
  <select data-filter="${name}"><option value="">all</option>${opts}</select>
</label>`;
  };
  return `<div class="filter-bar">
${select("project", "project", options.projects)}
${select("tool", "tool", options.tools)}
${select("flag", "flag", options.flags)}
</div>`;
}
