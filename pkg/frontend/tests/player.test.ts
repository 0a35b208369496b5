import { describe, expect, it } from 'vitest';

import { ClipPlayer, FrameSource } from '../src/player.js';

class FakeVideo implements FrameSource {
  currentTime = 0;
  paused = true;
  playCalls = 0;
  constructor(readonly duration: number) {}
  play(): void {
    this.paused = false;
    this.playCalls += 1;
  }
  pause(): void {
    this.paused = true;
  }
}

describe('ClipPlayer frame stepping', () => {
  it('moves exactly one frame per step at the configured rate', () => {
    const video = new FakeVideo(10);
    const player = new ClipPlayer(video);
    player.setFrameRate(25);

    expect(player.stepFrames(1)).toBe(1);
    expect(video.currentTime).toBeCloseTo(1 / 25, 10);
    expect(player.stepFrames(1)).toBe(2);
    expect(player.stepFrames(-1)).toBe(1);
    expect(video.currentTime).toBeCloseTo(1 / 25, 10);
  });

  it('pauses playback before stepping', () => {
    const video = new FakeVideo(10);
    video.paused = false;
    const player = new ClipPlayer(video);
    player.stepFrames(1);
    expect(video.paused).toBe(true);
  });

  it('clamps at the clip boundaries', () => {
    const video = new FakeVideo(1);
    const player = new ClipPlayer(video);
    player.setFrameRate(30);
    player.stepFrames(-5);
    expect(video.currentTime).toBe(0);
    player.stepFrames(45);
    expect(video.currentTime).toBe(1);
    expect(player.currentFrame()).toBe(30);
  });

  it('handles unknown duration (NaN) without clamping the top end', () => {
    const video = new FakeVideo(NaN);
    const player = new ClipPlayer(video);
    player.stepFrames(3);
    expect(video.currentTime).toBeCloseTo(0.1, 10);
  });

  it('rejects fractional steps and bad frame rates', () => {
    const player = new ClipPlayer(new FakeVideo(5));
    expect(() => player.stepFrames(0.5)).toThrow(/integer/);
    expect(() => player.setFrameRate(0)).toThrow(/positive/);
  });

  it('toggles between play and pause', () => {
    const video = new FakeVideo(5);
    const player = new ClipPlayer(video);
    player.togglePlay();
    expect(video.paused).toBe(false);
    player.togglePlay();
    expect(video.paused).toBe(true);
    expect(video.playCalls).toBe(1);
  });
});
