// Payload shapes for the contest service API. These mirror the server's
// response models; the leakage test keeps NEXT_CLIP_KEYS honest.

export type LabelSlug = 'no' | 'discrete' | 'confluent';

export const LABELS: Array<{ slug: LabelSlug; title: string; hint: string; key: string }> = [
  { slug: 'no', title: 'No B-lines', hint: 'A-lines only, no vertical artifacts', key: '1' },
  { slug: 'discrete', title: 'Discrete B-lines', hint: 'countable vertical laser-like artifacts', key: '2' },
  { slug: 'confluent', title: 'Confluent B-lines', hint: 'merged vertical artifacts, thick bright sections', key: '3' },
];

export interface NextClipView {
  clip_id: string;
  media_uri: string;
  frame_rate_hz: number;
}

// The next-clip payload must carry playback identity and nothing else;
// in particular no role (training/test) and no reference label.
export const NEXT_CLIP_KEYS = ['clip_id', 'media_uri', 'frame_rate_hz'] as const;

export interface FeedbackView {
  opinion_id: number;
  disposition: 'revealed' | 'recorded';
  revealed_label: LabelSlug | null;
  trailing_accuracy: number | null;
  scored_count: number;
}

export interface ContestView {
  contest_id: string;
  status: string;
  pool_size: number;
  prize_pool: number;
  seed: number;
}

export interface LeaderboardEntryView {
  rank: number;
  user_id: string;
  score: number;
  scored_count: number;
}

export interface LeaderboardView {
  contest_id: string;
  rows: LeaderboardEntryView[];
}

export interface ErrorBody {
  error: string;
  detail: string;
}
