import type { Cue } from "./protocol.js";

export type Tone = "A" | "B";

export interface ToneSink {
  play(tone: Tone): void;
}

export const toneFor = (c: Cue): Tone => (c.kind === "contact_made" ? "A" : "B");

/// Each cue arrives in exactly one snapshot; play them in order.
export class CuePlayer {
  muted = false;
  flashUntil = 0;

  constructor(
    private sink: ToneSink | null,
    private now: () => number = () => performance.now(),
  ) {}

  handle(cues: Cue[]): Tone[] {
    const tones = cues.map(toneFor);
    if (this.muted) return [];
    for (const tone of tones) {
      if (this.sink) this.sink.play(tone);
      else this.flashUntil = this.now() + 150;
    }
    return tones;
  }
}

export class WebAudioSink implements ToneSink {
  constructor(private ctx: AudioContext) {}

  play(tone: Tone): void {
    const osc = this.ctx.createOscillator();
    const gain = this.ctx.createGain();
    osc.frequency.value = tone === "A" ? 880 : 440;
    gain.gain.setValueAtTime(0.2, this.ctx.currentTime);
    gain.gain.exponentialRampToValueAtTime(0.001, this.ctx.currentTime + 0.15);
    osc.connect(gain).connect(this.ctx.destination);
    osc.start();
    osc.stop(this.ctx.currentTime + 0.15);
  }
}
