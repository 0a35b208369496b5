import { LABELS } from './types.js';

const SEEN_KEY = 'bline-tutorial-seen';

type StorageLike = Pick<Storage, 'getItem' | 'setItem'>;

export function shouldShowTutorial(storage: StorageLike): boolean {
  return storage.getItem(SEEN_KEY) !== '1';
}

export function markTutorialSeen(storage: StorageLike): void {
  storage.setItem(SEEN_KEY, '1');
}

/** One-time overlay explaining the three classes and the controls. */
export function renderTutorial(el: HTMLElement, onDismiss: () => void): void {
  const classRows = LABELS.map(
    (label) => `
      <li><b>${label.title}</b> <span class="key">${label.key}</span>
        <div class="muted">${label.hint}</div></li>`,
  ).join('');
  el.innerHTML = `
    <div class="tutorial-card">
      <h2>How to play</h2>
      <p>Watch each clip and classify it. Some clips score you instantly;
         every scored answer moves your accuracy and the leaderboard.</p>
      <ul>${classRows}</ul>
      <p class="muted">Space plays/pauses. Left and right arrows step one
         frame. Keys 1, 2, 3 submit. Enter loads the next clip.</p>
      <button id="tutorial-dismiss">Start labeling</button>
    </div>
  `;
  el.hidden = false;
  const button = el.querySelector('#tutorial-dismiss');
  button?.addEventListener('click', () => {
    el.hidden = true;
    onDismiss();
  });
}
