// Clip playback with frame-accurate stepping. Ultrasound clips are short
// loops, so stepping pauses first and nudges currentTime by 1/fps.

export interface FrameSource {
  currentTime: number;
  readonly duration: number;
  readonly paused: boolean;
  play(): unknown;
  pause(): void;
}

export class ClipPlayer {
  private frameRateHz = 30;

  constructor(private readonly video: FrameSource) {}

  get frameRate(): number {
    return this.frameRateHz;
  }

  setFrameRate(frameRateHz: number): void {
    if (!(frameRateHz > 0)) throw new Error(`frame rate must be positive, got ${frameRateHz}`);
    this.frameRateHz = frameRateHz;
  }

  /** Pause and move by a whole number of frames, clamped to the clip. */
  stepFrames(delta: number): number {
    if (!Number.isInteger(delta)) throw new Error(`frame delta must be an integer, got ${delta}`);
    if (!this.video.paused) this.video.pause();
    const length = Number.isFinite(this.video.duration) ? this.video.duration : Infinity;
    const next = this.video.currentTime + delta / this.frameRateHz;
    this.video.currentTime = Math.min(Math.max(next, 0), length);
    return this.currentFrame();
  }

  currentFrame(): number {
    return Math.round(this.video.currentTime * this.frameRateHz);
  }

  togglePlay(): void {
    if (this.video.paused) {
      this.video.play();
    } else {
      this.video.pause();
    }
  }
}

/** Wire a real <video> element plus a frame readout span to a player. */
export function bindPlayerControls(
  player: ClipPlayer,
  controls: {
    playButton?: HTMLElement | null;
    backButton?: HTMLElement | null;
    forwardButton?: HTMLElement | null;
    frameReadout?: HTMLElement | null;
  },
): void {
  const showFrame = () => {
    if (controls.frameReadout) {
      controls.frameReadout.textContent = `frame ${player.currentFrame()}`;
    }
  };
  controls.playButton?.addEventListener('click', () => player.togglePlay());
  controls.backButton?.addEventListener('click', () => {
    player.stepFrames(-1);
    showFrame();
  });
  controls.forwardButton?.addEventListener('click', () => {
    player.stepFrames(1);
    showFrame();
  });
  showFrame();
}
