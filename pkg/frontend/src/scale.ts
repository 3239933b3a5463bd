/** Linear and logarithmic axis mappings with simple tick generation. */

export interface Scale {
  map(value: number): number;
  ticks(): number[];
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  return {
    map: (v) => outLo + ((v - lo) / span) * (outHi - outLo),
    ticks: () => {
      const step = niceStep(span / 5);
      const first = Math.ceil(lo / step) * step;
      const result: number[] = [];
      for (let v = first; v <= hi + step * 1e-9; v += step) {
        result.push(roundTo(v, step));
      }
      return result;
    },
  };
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (lo <= 0 || hi <= 0) {
    throw new Error("log scale requires positive bounds");
  }
  const a = Math.log10(lo);
  const b = Math.log10(hi);
  const span = b - a || 1;
  return {
    map: (v) => outLo + ((Math.log10(v) - a) / span) * (outHi - outLo),
    ticks: () => {
      const result: number[] = [];
      for (let e = Math.ceil(a - 1e-9); e <= Math.floor(b + 1e-9); e++) {
        result.push(Number(Math.pow(10, e).toPrecision(1))); // exact decade values
      }
      return result.length >= 2 ? result : [lo, hi];
    },
  };
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const unit = raw / mag;
  if (unit <= 1) return mag;
  if (unit <= 2) return 2 * mag;
  if (unit <= 5) return 5 * mag;
  return 10 * mag;
}

function roundTo(value: number, step: number): number {
  const decimals = Math.max(0, -Math.floor(Math.log10(step)) + 1);
  return Number(value.toFixed(decimals));
}
