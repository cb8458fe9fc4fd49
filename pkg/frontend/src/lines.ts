/**
 * Incremental newline framing for a byte/text stream.
 *
 * The wire is UTF-8 NDJSON; TCP chunks split lines arbitrarily, so the
 * splitter buffers the trailing partial line between pushes. Trailing \r
 * is stripped for tolerance of CRLF producers.
 */
export class LineSplitter {
  private buffer = "";

  /** Feed a chunk; returns the complete lines it finished. */
  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.map((p) => (p.endsWith("\r") ? p.slice(0, -1) : p));
  }

  /** Any unterminated tail left in the buffer (null when empty). */
  flush(): string | null {
    const tail = this.buffer;
    this.buffer = "";
    return tail.length > 0 ? tail : null;
  }
}
