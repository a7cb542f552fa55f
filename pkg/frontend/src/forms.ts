/**
 * Client-side input validation. Mirrors the gateway's 422 rules so obviously
 * invalid submissions are blocked before any network round trip.
 */

export interface ValidationResult {
  ok: boolean;
  error: string;
}

export function validateReportText(text: string): ValidationResult {
  if (text.trim().length === 0) {
    return { ok: false, error: "Report text must not be empty." };
  }
  return { ok: true, error: "" };
}

/**
 * Split a free-form keyword field (comma- or newline-separated) into a clean
 * list: trimmed, empties dropped, case-insensitive duplicates keep-first.
 */
export function parseKeywordInput(raw: string): string[] {
  const seen = new Set<string>();
  const keywords: string[] = [];
  for (const piece of raw.split(/[,\n]/)) {
    const keyword = piece.trim();
    if (keyword.length === 0) continue;
    const key = keyword.toLowerCase();
    if (seen.has(key)) continue;
    seen.add(key);
    keywords.push(keyword);
  }
  return keywords;
}

export function validateKeywords(keywords: string[]): ValidationResult {
  if (keywords.length === 0) {
    return { ok: false, error: "At least one keyword is required." };
  }
  return { ok: true, error: "" };
}
