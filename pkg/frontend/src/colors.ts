/** Stable pastel color keys for logical areas (singletons stay uncolored). */

import type { AreaDoc } from "./types.js";

const HUE_STEP = 47; // coprime with 360 so consecutive ids spread out

export function areaColorKeys(areas: AreaDoc[]): Map<number, string> {
  const keys = new Map<number, string>();
  for (const area of areas) {
    if (area.members.length < 2) continue;
    const hue = (area.id * HUE_STEP) % 360;
    keys.set(area.id, `hsl(${hue}, 70%, 88%)`);
  }
  return keys;
}
