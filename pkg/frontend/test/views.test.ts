import { describe, expect, it } from "vitest";

import {
  applyFilters,
  escapeHtml,
  filterOptions,
  formatAge,
  renderBanner,
  renderDetail,
  renderDiff,
  renderQueue,
} from "../src/views.js";
import type { PatchDetail, QueueItemView } from "../src/types.js";
import { NO_FILTERS } from "../src/types.js";

function item(overrides: Partial<QueueItemView> = {}): QueueItemView {
  return {
    patch_id: "b1.tool.abc",
    project: "acme/x",
    build_id: "b1",
    build_link: "feed::b1",
    tool: "npe-guard",
    diff: "--- a/f\n+++ b/f\n@@ -1 +1 @@\n-old\n+new\n",
    flags: [],
    age_seconds: 30,
    verdict: "pending",
    created_at: "2017-06-01T12:00:00+00:00",
    note: "skip-guard",
    ...overrides,
  };
}

function rowOrder(html: string): string[] {
  return [...html.matchAll(/data-patch-id="([^"]+)"/g)].map((m) => m[1]!);
}

describe("renderQueue", () => {
  it("keeps server order: unflagged rows arrive first and stay first", () => {
    const items = [
      item({ patch_id: "clean-1", flags: [] }),
      item({ patch_id: "clean-2", flags: [] }),
      item({ patch_id: "flagged", flags: ["constant_predicate"] }),
    ];
    expect(rowOrder(renderQueue(items, null))).toEqual(["clean-1", "clean-2", "flagged"]);
  });

  it("renders two rows for a two-item queue", () => {
    const html = renderQueue([item({ patch_id: "a" }), item({ patch_id: "b" })], null);
    expect(html.match(/queue-row/g)).toHaveLength(2);
  });

  it("shows an explicit empty state", () => {
    expect(renderQueue([], null)).toContain("empty-state");
    expect(renderQueue([], null)).toContain("No pending patches");
  });

  it("marks the selected row", () => {
    const html = renderQueue([item({ patch_id: "a" }), item({ patch_id: "b" })], "b");
    expect(html).toMatch(/queue-row selected" data-patch-id="b"/);
  });
});

describe("applyFilters", () => {
  const items = [
    item({ patch_id: "p1", project: "acme/x", tool: "npe-guard", flags: [] }),
    item({ patch_id: "p2", project: "acme/y", tool: "condition-synth", flags: ["constant_predicate"] }),
    item({
      patch_id: "p3",
      project: "acme/x",
      tool: "condition-synth",
      flags: ["constant_predicate", "syntactic_tautology"],
    }),
  ];

  it("flag filter keeps only flagged rows", () => {
    const hits = applyFilters(items, { ...NO_FILTERS, flag: "constant_predicate" });
    expect(hits.map((i) => i.patch_id)).toEqual(["p2", "p3"]);
  });

  it("project and tool filters compose", () => {
    const hits = applyFilters(items, { project: "acme/x", tool: "condition-synth", flag: "" });
    expect(hits.map((i) => i.patch_id)).toEqual(["p3"]);
  });

  it("no filters is identity, order preserved", () => {
    expect(applyFilters(items, NO_FILTERS)).toEqual(items);
  });

  it("collects filter options sorted", () => {
    expect(filterOptions(items)).toEqual({
      projects: ["acme/x", "acme/y"],
      tools: ["condition-synth", "npe-guard"],
      flags: ["constant_predicate", "syntactic_tautology"],
    });
  });
});

describe("renderDiff", () => {
  it("classes added, removed, hunk, and meta lines", () => {
    const html = renderDiff("--- a/f\n+++ b/f\n@@ -1 +1 @@\n ctx\n-gone\n+here\n");
    expect(html).toContain('<span class="diff-meta">--- a/f</span>');
    expect(html).toContain('<span class="diff-hunk">@@ -1 +1 @@</span>');
    expect(html).toContain('<span class="diff-del">-gone</span>');
    expect(html).toContain('<span class="diff-add">+here</span>');
    expect(html).toContain('<span class="diff-ctx"> ctx</span>');
  });

  it("escapes markup inside the diff", () => {
    const html = renderDiff("+if (a < b && c) { }\n");
    expect(html).toContain("a &lt; b &amp;&amp; c");
    expect(html).not.toContain("<b &&");
  });
});

describe("renderDetail", () => {
  function detail(overrides: Partial<PatchDetail> = {}): PatchDetail {
    return { ...item(), build: { build_id: "b1" }, ...overrides };
  }

  it("disables propose while the verdict is pending", () => {
    const html = renderDetail(detail(), null);
    expect(html).toMatch(/<button id="propose" disabled/);
    expect(html).toContain('data-verdict="correct"');
  });

  it("enables propose only after verdict=correct", () => {
    const correct = renderDetail(detail({ verdict: "correct" }), null);
    expect(correct).toMatch(/<button id="propose" >/);
    const overfit = renderDetail(detail({ verdict: "overfitting" }), null);
    expect(overfit).toMatch(/<button id="propose" disabled/);
  });

  it("hides verdict buttons once decided", () => {
    const html = renderDetail(detail({ verdict: "overfitting" }), null);
    expect(html).not.toContain("data-verdict=");
    expect(html).toContain("verdict: <strong>overfitting</strong>");
  });

  it("shows the proposal branch after propose", () => {
    const html = renderDetail(detail({ verdict: "correct" }), "repair/b1.tool.abc");
    expect(html).toContain("repair/b1.tool.abc");
    expect(html).toMatch(/<button id="propose" disabled/);
  });
});

describe("small helpers", () => {
  it("escapes html", () => {
    expect(escapeHtml(`<a b="c">&`)).toBe("&lt;a b=&quot;c&quot;&gt;&amp;");
  });

  it("formats ages", () => {
    expect(formatAge(45)).toBe("45s");
    expect(formatAge(600)).toBe("10m");
    expect(formatAge(7200)).toBe("2h");
    expect(formatAge(200000)).toBe("2d");
  });

  it("banner renders only with a message", () => {
    expect(renderBanner(null)).toBe("");
    expect(renderBanner("API unreachable")).toContain("retry");
  });
});
