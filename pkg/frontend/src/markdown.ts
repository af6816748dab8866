/** Minimal markdown renderer for assistant answers.
 *
 * Sanitize-first: the whole input is HTML-escaped before any markup is
 * applied, so raw HTML in an answer always renders as visible text. Supported
 * constructs are the ones answers actually use: fenced code blocks, inline
 * code, bold, unordered lists and paragraphs.
 */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function renderInline(escaped: string): string {
  return escaped
    .replace(/`([^`]+)`/g, "<code>$1</code>")
    .replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");
}

export function renderMarkdown(text: string): string {
  const out: string[] = [];
  // Split out fenced code blocks first; everything inside them is verbatim.
  const segments = text.split(/^```[^\n]*\n?/m);
  segments.forEach((segment, index) => {
    const inFence = index % 2 === 1;
    if (inFence) {
      out.push(`<pre><code>${escapeHtml(segment.replace(/\n$/, ""))}</code></pre>`);
      return;
    }
    for (const block of segment.split(/\n{2,}/)) {
      const trimmed = block.trim();
      if (!trimmed) continue;
      const lines = trimmed.split("\n");
      if (lines.every((line) => /^[-*] /.test(line.trim()))) {
        const items = lines
          .map((line) => `<li>${renderInline(escapeHtml(line.trim().slice(2)))}</li>`)
          .join("");
        out.push(`<ul>${items}</ul>`);
      } else {
        out.push(`<p>${renderInline(escapeHtml(trimmed))}</p>`);
      }
    }
  });
  return out.join("\n");
}
