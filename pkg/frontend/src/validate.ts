/** Client-side quartile validation.
 *
 * Mirrors the server's rules so obviously broken input never produces a
 * request; the server remains authoritative.
 */

import type { DistributionKind, QuantityName, Quartiles } from "./types.js";

export const DEFAULT_KINDS: Record<QuantityName, DistributionKind> = {
  S1_t0: "beta",
  delta11: "beta",
  delta21: "normal",
  delta22: "beta",
};

/** Returns an error message, or null when the triple is acceptable. */
export function validateQuartiles(
  name: QuantityName,
  q: Quartiles,
  kind?: DistributionKind,
): string | null {
  const k = kind ?? DEFAULT_KINDS[name];
  const values = [q.q25, q.q50, q.q75];
  if (values.some((v) => v === null || v === undefined || Number.isNaN(v))) {
    return "all three quartiles are required";
  }
  if (!values.every((v) => Number.isFinite(v))) {
    return "quartiles must be finite numbers";
  }
  if (!(q.q25 < q.q50 && q.q50 < q.q75)) {
    return "quartiles must be strictly increasing (q25 < q50 < q75)";
  }
  if (k === "beta" && !(q.q25 > 0 && q.q75 < 1)) {
    return "a proportion's quartiles must lie strictly inside (0, 1)";
  }
  if (name !== "S1_t0" && (q.q25 <= -1 || q.q75 >= 1)) {
    return "a difference of proportions must lie inside (-1, 1)";
  }
  return null;
}

export function parseQuartileInput(raw: string): number {
  const trimmed = raw.trim();
  if (trimmed === "") return Number.NaN;
  return Number(trimmed);
}
