/** Thin fetch wrappers over the query service. */

import { ConceptsDocument, HistoryEntry, QueryDoc, StatusBody } from "./model.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public violations: string[] = [],
  ) {
    super(message);
  }
}

export class Api {
  constructor(
    private base: string = "",
    private owner: string = "analyst",
  ) {}

  private headers(): Record<string, string> {
    return { "X-User": this.owner, "Content-Type": "application/json" };
  }

  async getConcepts(): Promise<ConceptsDocument> {
    const r = await fetch(`${this.base}/api/concepts`, { headers: this.headers() });
    if (!r.ok) throw new ApiError(r.status, `concepts fetch failed (${r.status})`);
    return r.json();
  }

  async submit(doc: QueryDoc): Promise<string> {
    const r = await fetch(`${this.base}/api/queries`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(doc),
    });
    const body = await r.json();
    if (r.status === 400) {
      throw new ApiError(400, body.violations?.join("; ") ?? "invalid query", body.violations);
    }
    if (!r.ok) throw new ApiError(r.status, `submit failed (${r.status})`);
    return body.executionId;
  }

  async status(executionId: string): Promise<StatusBody> {
    const r = await fetch(`${this.base}/api/queries/${executionId}`, {
      headers: this.headers(),
    });
    if (!r.ok) throw new ApiError(r.status, `status failed (${r.status})`);
    return r.json();
  }

  /** Poll until the execution leaves RUNNING; resolves with the final status. */
  async pollUntilDone(
    executionId: string,
    intervalMs = 250,
    onTick?: (s: StatusBody) => void,
  ): Promise<StatusBody> {
    for (;;) {
      const s = await this.status(executionId);
      onTick?.(s);
      if (s.state !== "RUNNING" && s.state !== "CREATED") return s;
      await new Promise((res) => setTimeout(res, intervalMs));
    }
  }

  resultUrl(executionId: string): string {
    return `${this.base}/api/queries/${executionId}/result.csv`;
  }

  async downloadCsv(executionId: string): Promise<string> {
    const r = await fetch(this.resultUrl(executionId), { headers: this.headers() });
    if (!r.ok) throw new ApiError(r.status, `result not available (${r.status})`);
    return r.text();
  }

  async history(): Promise<HistoryEntry[]> {
    const r = await fetch(`${this.base}/api/queries`, { headers: this.headers() });
    if (!r.ok) throw new ApiError(r.status, `history failed (${r.status})`);
    return r.json();
  }

  async rename(executionId: string, name: string): Promise<void> {
    await fetch(`${this.base}/api/queries/${executionId}`, {
      method: "PATCH",
      headers: this.headers(),
      body: JSON.stringify({ name }),
    });
  }

  async remove(executionId: string): Promise<void> {
    await fetch(`${this.base}/api/queries/${executionId}`, {
      method: "DELETE",
      headers: this.headers(),
    });
  }
}
