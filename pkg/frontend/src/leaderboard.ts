import { LeaderboardView } from './types.js';

export function renderLeaderboard(
  el: HTMLElement,
  view: LeaderboardView,
  highlightUser?: string,
): void {
  el.innerHTML = '';
  if (view.rows.length === 0) {
    el.innerHTML = '<div class="muted">No scored opinions yet</div>';
    return;
  }
  const table = document.createElement('table');
  table.className = 'board';
  table.innerHTML = '<thead><tr><th>#</th><th>user</th><th>score</th><th>scored</th></tr></thead>';
  const tbody = document.createElement('tbody');
  for (const row of view.rows) {
    const tr = document.createElement('tr');
    if (row.user_id === highlightUser) tr.className = 'me';
    tr.innerHTML = `
      <td>${row.rank}</td>
      <td>${escapeHtml(row.user_id)}</td>
      <td>${row.score.toFixed(1)}</td>
      <td>${row.scored_count}</td>
    `;
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  el.appendChild(table);
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Parse the service's leaderboard CSV export (rank,user_id,score,scored_count). */
export function leaderboardFromCsv(csv: string): LeaderboardView['rows'] {
  const lines = csv.split('\n').filter((line) => line.trim() !== '');
  if (lines.length === 0) return [];
  const header = lines[0];
  if (header !== 'rank,user_id,score,scored_count') {
    throw new Error(`unexpected leaderboard header: ${header}`);
  }
  return lines.slice(1).map((line) => {
    const parts = line.split(',');
    if (parts.length !== 4) throw new Error(`bad leaderboard row: ${line}`);
    return {
      rank: Number(parts[0]),
      user_id: parts[1] ?? '',
      score: Number(parts[2]),
      scored_count: Number(parts[3]),
    };
  });
}

/** True when the JSON view and the CSV export describe the same ranking. */
export function matchesExport(view: LeaderboardView, csv: string): boolean {
  const exported = leaderboardFromCsv(csv);
  if (exported.length !== view.rows.length) return false;
  return view.rows.every((row, i) => {
    const other = exported[i];
    return (
      other !== undefined &&
      other.rank === row.rank &&
      other.user_id === row.user_id &&
      // the CSV export rounds scores to 6 decimals
      Math.abs(other.score - row.score) <= 5e-7 &&
      other.scored_count === row.scored_count
    );
  });
}

/** Poll and re-render until the returned stop function is called. */
export function startLeaderboardPolling(
  el: HTMLElement,
  load: () => Promise<LeaderboardView>,
  intervalMs = 5000,
  highlightUser?: string,
): () => void {
  let stopped = false;
  const tick = async () => {
    if (stopped) return;
    try {
      const view = await load();
      if (!stopped) renderLeaderboard(el, view, highlightUser);
    } catch (err) {
      console.error('leaderboard refresh failed', err);
    }
  };
  void tick();
  const timer = setInterval(tick, intervalMs);
  return () => {
    stopped = true;
    clearInterval(timer);
  };
}
