import type {
  PatchDetail,
  ProposalResponse,
  QueueItemView,
  StatsResponse,
  VerdictResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }

  get isForbidden(): boolean {
    return this.status === 403;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private token: string | null = null,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      ...((init?.headers as Record<string, string>) ?? {}),
    };
    if (init?.body) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Auth-Token"] = this.token;
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, { ...init, headers });
    } catch (err) {
      throw new ApiError(0, `API unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listPatches(status: "pending" | "decided" | "all" = "pending"): Promise<QueueItemView[]> {
    return this.request(`/patches?status=${status}`);
  }

  getPatch(patchId: string): Promise<PatchDetail> {
    return this.request(`/patches/${encodeURIComponent(patchId)}`);
  }

  postVerdict(patchId: string, verdict: string, analystId: string, note = ""): Promise<VerdictResponse> {
    return this.request(`/patches/${encodeURIComponent(patchId)}/verdict`, {
      method: "POST",
      body: JSON.stringify({ verdict, analyst_id: analystId, note }),
    });
  }

  postPropose(patchId: string, analystId: string): Promise<ProposalResponse> {
    return this.request(`/patches/${encodeURIComponent(patchId)}/propose`, {
      method: "POST",
      body: JSON.stringify({ analyst_id: analystId }),
    });
  }

  getStats(): Promise<StatsResponse> {
    return this.request("/stats");
  }
}
