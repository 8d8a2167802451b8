// Preference-context draft: n ordered slots, each holding a (preferred,
// dispreferred) patch pair with a swap control. The draft is submittable
// only when every slot is filled.

import type { ContextWire, GalleryPatch } from "./types.js";

export const N_SLOTS = 3;

export type Side = "preferred" | "dispreferred";

export interface Slot {
  preferred: GalleryPatch | null;
  dispreferred: GalleryPatch | null;
}

export class ContextDraft {
  readonly slots: Slot[];

  constructor(nSlots: number = N_SLOTS) {
    this.slots = Array.from({ length: nSlots }, () => ({
      preferred: null,
      dispreferred: null,
    }));
  }

  place(slotIndex: number, side: Side, patch: GalleryPatch): void {
    if (slotIndex < 0 || slotIndex >= this.slots.length) {
      throw new Error(`slot ${slotIndex} out of range`);
    }
    this.slots[slotIndex][side] = patch;
  }

  clear(slotIndex: number): void {
    this.slots[slotIndex].preferred = null;
    this.slots[slotIndex].dispreferred = null;
  }

  /** Invert one pairwise preference (the slot's swap control). */
  swap(slotIndex: number): void {
    const slot = this.slots[slotIndex];
    const held = slot.preferred;
    slot.preferred = slot.dispreferred;
    slot.dispreferred = held;
  }

  get isComplete(): boolean {
    return this.slots.every((s) => s.preferred !== null && s.dispreferred !== null);
  }

  get isEmpty(): boolean {
    return this.slots.every((s) => s.preferred === null && s.dispreferred === null);
  }

  /** Wire form; only valid once complete. */
  toWire(): ContextWire {
    if (!this.isComplete) {
      throw new Error("context draft incomplete: fill every slot before submitting");
    }
    return {
      pairs: this.slots.map((s) => ({
        preferred: s.preferred!.png,
        dispreferred: s.dispreferred!.png,
      })),
    };
  }

  /** Seeds of every placed patch, for replayable exports. */
  patchProvenance(): { slot: number; side: Side; label: number; seed: number; index: number }[] {
    const out: { slot: number; side: Side; label: number; seed: number; index: number }[] = [];
    this.slots.forEach((s, i) => {
      (["preferred", "dispreferred"] as Side[]).forEach((side) => {
        const p = s[side];
        if (p !== null) {
          out.push({ slot: i, side, label: p.label, seed: p.seed, index: p.index });
        }
      });
    });
    return out;
  }
}
