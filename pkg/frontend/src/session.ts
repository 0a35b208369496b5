import { Api, ApiError } from './api.js';
import { FeedbackView, LabelSlug, NextClipView } from './types.js';

export type SessionPhase = 'idle' | 'loading' | 'labeling' | 'feedback' | 'done' | 'error';

export interface SessionState {
  phase: SessionPhase;
  clip: NextClipView | null;
  feedback: FeedbackView | null;
  submitted: number;
  streak: number;
  error: string | null;
}

type Listener = (state: SessionState) => void;

/** Drives one user's labeling loop: fetch clip, submit, show feedback,
 * advance. Server state is the source of truth; this only sequences
 * requests and keeps counters for the header display. */
export class LabelingSession {
  private state: SessionState = {
    phase: 'idle',
    clip: null,
    feedback: null,
    submitted: 0,
    streak: 0,
    error: null,
  };
  private listeners: Listener[] = [];

  constructor(
    private readonly api: Pick<Api, 'nextClip' | 'submitOpinion'>,
    readonly contestId: string,
    readonly userId: string,
  ) {}

  snapshot(): SessionState {
    return { ...this.state };
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.snapshot());
  }

  async start(): Promise<void> {
    await this.advance();
  }

  async advance(): Promise<void> {
    this.update({ phase: 'loading', feedback: null, error: null });
    try {
      const clip = await this.api.nextClip(this.contestId, this.userId);
      this.update({ phase: 'labeling', clip });
    } catch (err) {
      this.fail(err);
    }
  }

  async submit(label: LabelSlug): Promise<FeedbackView | null> {
    const clip = this.state.clip;
    if (this.state.phase !== 'labeling' || clip === null) return null;
    this.update({ phase: 'loading' });
    try {
      const feedback = await this.api.submitOpinion(
        this.contestId, this.userId, clip.clip_id, label,
      );
      const correct = feedback.disposition === 'revealed' && feedback.revealed_label === label;
      this.update({
        phase: 'feedback',
        feedback,
        submitted: this.state.submitted + 1,
        streak: feedback.disposition === 'revealed' ? (correct ? this.state.streak + 1 : 0) : this.state.streak,
      });
      return feedback;
    } catch (err) {
      this.fail(err);
      return null;
    }
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError && err.code === 'ContestClosed') {
      this.update({ phase: 'done', error: null });
      return;
    }
    const message = err instanceof Error ? err.message : String(err);
    this.update({ phase: 'error', error: message });
  }
}

export function describeFeedback(feedback: FeedbackView, chosen: LabelSlug): string {
  if (feedback.disposition === 'revealed') {
    if (feedback.revealed_label === chosen) return 'Correct';
    return `Not quite: the answer was "${feedback.revealed_label}"`;
  }
  return 'Recorded';
}
