import {
  ContestView,
  FeedbackView,
  LabelSlug,
  LeaderboardView,
  NEXT_CLIP_KEYS,
  NextClipView,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Reject any next-clip payload that carries more than playback identity.
 * A server regression that starts leaking clip role or reference labels
 * fails here instead of silently reaching the UI. */
export function assertNextClipShape(payload: unknown): NextClipView {
  if (payload === null || typeof payload !== 'object' || Array.isArray(payload)) {
    throw new Error('next-clip payload is not an object');
  }
  const record = payload as Record<string, unknown>;
  const extra = Object.keys(record).filter(
    (key) => !(NEXT_CLIP_KEYS as readonly string[]).includes(key),
  );
  if (extra.length > 0) {
    throw new Error(`next-clip payload leaks fields: ${extra.sort().join(', ')}`);
  }
  if (typeof record.clip_id !== 'string' || record.clip_id === '') {
    throw new Error('next-clip payload missing clip_id');
  }
  if (typeof record.media_uri !== 'string') {
    throw new Error('next-clip payload missing media_uri');
  }
  if (typeof record.frame_rate_hz !== 'number' || !(record.frame_rate_hz > 0)) {
    throw new Error('next-clip payload missing frame_rate_hz');
  }
  return { clip_id: record.clip_id, media_uri: record.media_uri, frame_rate_hz: record.frame_rate_hz };
}

async function raise(res: Response): Promise<never> {
  let code = `HTTP ${res.status}`;
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { error?: string; detail?: string };
    if (body && typeof body.error === 'string') code = body.error;
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body, keep the status text
  }
  throw new ApiError(res.status, code, detail);
}

export function makeApi(baseUrl = '', fetchFn: FetchLike = fetch) {
  async function getJson<T>(path: string): Promise<T> {
    const res = await fetchFn(baseUrl + path);
    if (!res.ok) await raise(res);
    return (await res.json()) as T;
  }

  async function postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await fetchFn(baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) await raise(res);
    return (await res.json()) as T;
  }

  return {
    async nextClip(contestId: string, userId: string): Promise<NextClipView> {
      const raw = await getJson<unknown>(
        `/contests/${encodeURIComponent(contestId)}/next-clip?user=${encodeURIComponent(userId)}`,
      );
      return assertNextClipShape(raw);
    },

    submitOpinion(
      contestId: string,
      userId: string,
      clipId: string,
      label: LabelSlug,
    ): Promise<FeedbackView> {
      return postJson<FeedbackView>('/opinions', {
        contest_id: contestId,
        user_id: userId,
        clip_id: clipId,
        label,
      });
    },

    contest(contestId: string): Promise<ContestView> {
      return getJson<ContestView>(`/contests/${encodeURIComponent(contestId)}`);
    },

    leaderboard(contestId: string): Promise<LeaderboardView> {
      return getJson<LeaderboardView>(
        `/contests/${encodeURIComponent(contestId)}/leaderboard`,
      );
    },

    async leaderboardCsv(contestId: string): Promise<string> {
      const res = await fetchFn(
        `${baseUrl}/contests/${encodeURIComponent(contestId)}/export/leaderboard.csv`,
      );
      if (!res.ok) await raise(res);
      return res.text();
    },
  };
}

export type Api = ReturnType<typeof makeApi>;
