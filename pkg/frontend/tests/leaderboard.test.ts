// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import {
  leaderboardFromCsv,
  matchesExport,
  renderLeaderboard,
  startLeaderboardPolling,
} from '../src/leaderboard.js';
import { LeaderboardView } from '../src/types.js';

const VIEW: LeaderboardView = {
  contest_id: 'c1',
  rows: [
    { rank: 1, user_id: 'ann', score: 12.5, scored_count: 14 },
    { rank: 2, user_id: 'bob<', score: 9.0, scored_count: 11 },
  ],
};

const CSV = 'rank,user_id,score,scored_count\n1,ann,12.500000,14\n2,bob<,9.000000,11\n';

describe('renderLeaderboard', () => {
  it('renders a ranked table and highlights the current user', () => {
    const el = document.createElement('div');
    renderLeaderboard(el, VIEW, 'ann');
    const rows = el.querySelectorAll('tbody tr');
    expect(rows.length).toBe(2);
    expect(rows[0]!.textContent).toContain('ann');
    expect(rows[0]!.textContent).toContain('12.5');
    expect(rows[0]!.className).toBe('me');
    expect(rows[1]!.className).toBe('');
    // user ids are escaped, not injected
    expect(el.innerHTML).toContain('bob&lt;');
  });

  it('shows a placeholder when nobody scored yet', () => {
    const el = document.createElement('div');
    renderLeaderboard(el, { contest_id: 'c1', rows: [] });
    expect(el.textContent).toContain('No scored opinions yet');
  });
});

describe('export comparison', () => {
  it('parses the CSV export format', () => {
    const rows = leaderboardFromCsv(CSV);
    expect(rows).toEqual(VIEW.rows);
  });

  it('accepts matching view/export pairs and rejects drift', () => {
    expect(matchesExport(VIEW, CSV)).toBe(true);
    const reordered = CSV.replace('1,ann', '1,zed');
    expect(matchesExport(VIEW, reordered)).toBe(false);
    expect(matchesExport({ ...VIEW, rows: VIEW.rows.slice(0, 1) }, CSV)).toBe(false);
  });

  it('rejects unknown headers', () => {
    expect(() => leaderboardFromCsv('user,points\nann,3\n')).toThrow(/header/);
  });
});

describe('startLeaderboardPolling', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('renders immediately, refreshes on the interval, and stops cleanly', async () => {
    const el = document.createElement('div');
    let calls = 0;
    const load = async (): Promise<LeaderboardView> => {
      calls += 1;
      return VIEW;
    };
    const stop = startLeaderboardPolling(el, load, 1000);
    await vi.advanceTimersByTimeAsync(1);
    expect(calls).toBe(1);
    expect(el.querySelectorAll('tbody tr').length).toBe(2);

    await vi.advanceTimersByTimeAsync(2000);
    expect(calls).toBe(3);

    stop();
    await vi.advanceTimersByTimeAsync(5000);
    expect(calls).toBe(3);
  });

  it('keeps the last good render when a refresh fails', async () => {
    const el = document.createElement('div');
    let calls = 0;
    const load = async (): Promise<LeaderboardView> => {
      calls += 1;
      if (calls > 1) throw new Error('offline');
      return VIEW;
    };
    const consoleError = vi.spyOn(console, 'error').mockImplementation(() => undefined);
    const stop = startLeaderboardPolling(el, load, 1000);
    await vi.advanceTimersByTimeAsync(1);
    await vi.advanceTimersByTimeAsync(1000);
    expect(el.querySelectorAll('tbody tr').length).toBe(2);
    stop();
    consoleError.mockRestore();
  });
});
