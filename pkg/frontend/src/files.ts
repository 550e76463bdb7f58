/** Input file collection: literal paths plus single-star glob patterns. */
import { readdirSync, statSync } from "node:fs";
import * as path from "node:path";

function segmentToRegExp(segment: string): RegExp {
  const escaped = segment.replace(/[.+^${}()|[\]\\?]/g, "\\$&");
  return new RegExp(`^${escaped.replace(/\*/g, ".*")}$`);
}

/**
 * Expand one pattern into matching file paths.
 *
 * `*` matches within a path segment (no recursive `**`); a pattern without
 * any star is returned as-is so shell-expanded arguments pass through.
 * Matches come back sorted for stable figure layouts.
 */
export function expandPattern(pattern: string): string[] {
  if (!pattern.includes("*")) return [pattern];
  const segments = pattern.split(path.sep);
  let candidates: string[] = [segments[0] === "" ? path.sep : "."];
  const start = segments[0] === "" ? 1 : 0;
  for (let i = start; i < segments.length; i++) {
    const segment = segments[i];
    if (segment === "" || segment === ".") continue;
    const next: string[] = [];
    if (!segment.includes("*")) {
      for (const base of candidates) next.push(path.join(base, segment));
    } else {
      const re = segmentToRegExp(segment);
      for (const base of candidates) {
        let entries: string[];
        try {
          entries = readdirSync(base);
        } catch {
          continue;
        }
        for (const entry of entries.sort()) {
          if (re.test(entry)) next.push(path.join(base, entry));
        }
      }
    }
    candidates = next;
  }
  return candidates.filter((p) => {
    try {
      return statSync(p).isFile();
    } catch {
      return false;
    }
  });
}

/** Expand several patterns, keeping order and dropping duplicates. */
export function expandPatterns(patterns: string[]): string[] {
  const out: string[] = [];
  const seen = new Set<string>();
  for (const pattern of patterns) {
    for (const p of expandPattern(pattern)) {
      if (!seen.has(p)) {
        seen.add(p);
        out.push(p);
      }
    }
  }
  return out;
}
