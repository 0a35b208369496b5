import { makeApi } from './api.js';
import { startLeaderboardPolling } from './leaderboard.js';
import { ClipPlayer, bindPlayerControls } from './player.js';
import { LabelingSession, describeFeedback } from './session.js';
import { markTutorialSeen, renderTutorial, shouldShowTutorial } from './tutorial.js';
import { LABELS, LabelSlug } from './types.js';

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function setup(): void {
  const params = new URLSearchParams(window.location.search);
  const contestId = params.get('contest') ?? '';
  const userId = params.get('user') ?? '';
  const baseUrl = params.get('api') ?? '';

  const status = byId<HTMLElement>('status');
  if (!contestId || !userId) {
    status.textContent = 'Add ?contest=<id>&user=<name> to the URL to join a contest.';
    return;
  }

  const api = makeApi(baseUrl);
  const session = new LabelingSession(api, contestId, userId);
  const video = byId<HTMLVideoElement>('clip');
  const player = new ClipPlayer(video);
  const feedbackEl = byId<HTMLElement>('feedback');
  const clipLabel = byId<HTMLElement>('clip-id');
  const statsEl = byId<HTMLElement>('stats');
  const nextButton = byId<HTMLButtonElement>('btn-next');

  bindPlayerControls(player, {
    playButton: document.getElementById('btn-play'),
    backButton: document.getElementById('btn-back'),
    forwardButton: document.getElementById('btn-fwd'),
    frameReadout: document.getElementById('frame-no'),
  });

  let lastChoice: LabelSlug | null = null;
  const labelButtons = new Map<LabelSlug, HTMLButtonElement>();
  const buttonsEl = byId<HTMLElement>('label-buttons');
  for (const label of LABELS) {
    const button = document.createElement('button');
    button.textContent = `${label.key}. ${label.title}`;
    button.title = label.hint;
    button.addEventListener('click', () => {
      lastChoice = label.slug;
      void session.submit(label.slug);
    });
    labelButtons.set(label.slug, button);
    buttonsEl.appendChild(button);
  }

  session.onChange((state) => {
    const labeling = state.phase === 'labeling';
    for (const button of labelButtons.values()) button.disabled = !labeling;
    nextButton.disabled = state.phase !== 'feedback';

    if (state.clip) {
      clipLabel.textContent = state.clip.clip_id;
      if (video.src !== state.clip.media_uri) {
        video.src = state.clip.media_uri;
        player.setFrameRate(state.clip.frame_rate_hz);
        video.load();
        void video.play()?.catch(() => undefined);
      }
    }

    statsEl.textContent = `submitted ${state.submitted} | streak ${state.streak}`;
    switch (state.phase) {
      case 'loading':
        status.textContent = 'loading...';
        break;
      case 'labeling':
        status.textContent = 'Your call:';
        feedbackEl.textContent = '';
        feedbackEl.className = '';
        break;
      case 'feedback': {
        status.textContent = '';
        if (state.feedback && lastChoice) {
          feedbackEl.textContent = describeFeedback(state.feedback, lastChoice);
          const correct =
            state.feedback.disposition === 'revealed' &&
            state.feedback.revealed_label === lastChoice;
          feedbackEl.className = state.feedback.disposition === 'revealed'
            ? (correct ? 'good' : 'bad')
            : 'muted';
          if (state.feedback.trailing_accuracy !== null) {
            statsEl.textContent += ` | recent accuracy ${(state.feedback.trailing_accuracy * 100).toFixed(0)}%`;
          }
        }
        break;
      }
      case 'done':
        status.textContent = 'Contest closed. Thanks for playing!';
        break;
      case 'error':
        status.textContent = `Error: ${state.error}`;
        break;
    }
  });

  document.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    switch (event.key) {
      case ' ':
        event.preventDefault();
        player.togglePlay();
        break;
      case 'ArrowLeft':
        player.stepFrames(-1);
        break;
      case 'ArrowRight':
        player.stepFrames(1);
        break;
      case 'Enter':
        if (session.snapshot().phase === 'feedback') void session.advance();
        break;
      default: {
        const match = LABELS.find((label) => label.key === event.key);
        if (match && session.snapshot().phase === 'labeling') {
          lastChoice = match.slug;
          void session.submit(match.slug);
        }
      }
    }
  });
  nextButton.addEventListener('click', () => void session.advance());

  startLeaderboardPolling(
    byId<HTMLElement>('leaderboard'),
    () => api.leaderboard(contestId),
    5000,
    userId,
  );

  const begin = () => void session.start();
  const tutorialEl = byId<HTMLElement>('tutorial');
  if (shouldShowTutorial(window.localStorage)) {
    renderTutorial(tutorialEl, () => {
      markTutorialSeen(window.localStorage);
      begin();
    });
  } else {
    begin();
  }
}

document.addEventListener('DOMContentLoaded', setup);
