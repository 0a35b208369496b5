// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { markTutorialSeen, renderTutorial, shouldShowTutorial } from '../src/tutorial.js';

function fakeStorage(): Pick<Storage, 'getItem' | 'setItem'> {
  const data = new Map<string, string>();
  return {
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => void data.set(key, value),
  };
}

describe('tutorial', () => {
  it('shows once and stays dismissed after being marked seen', () => {
    const storage = fakeStorage();
    expect(shouldShowTutorial(storage)).toBe(true);
    markTutorialSeen(storage);
    expect(shouldShowTutorial(storage)).toBe(false);
  });

  it('explains all three classes and hides on dismiss', () => {
    const el = document.createElement('div');
    el.hidden = true;
    let dismissed = false;
    renderTutorial(el, () => {
      dismissed = true;
    });
    expect(el.hidden).toBe(false);
    expect(el.textContent).toContain('No B-lines');
    expect(el.textContent).toContain('Discrete B-lines');
    expect(el.textContent).toContain('Confluent B-lines');

    (el.querySelector('#tutorial-dismiss') as HTMLButtonElement).click();
    expect(dismissed).toBe(true);
    expect(el.hidden).toBe(true);
  });
});
