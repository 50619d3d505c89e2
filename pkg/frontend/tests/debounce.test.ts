import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { SLIDER_DEBOUNCE_MS, debounce } from '../src/debounce';

describe('debounce', () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it('runs once with the latest arguments after the quiet period', () => {
    const calls: number[] = [];
    const d = debounce((x: number) => calls.push(x), 150);
    d(1);
    d(2);
    vi.advanceTimersByTime(149);
    d(3);
    vi.advanceTimersByTime(149);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([3]);
  });

  it('a drag sequence produces a single invocation', () => {
    const fn = vi.fn();
    const d = debounce(fn, SLIDER_DEBOUNCE_MS);
    for (let i = 0; i < 50; i++) {
      d(i);
      vi.advanceTimersByTime(10); // fast scrubbing, well under 150 ms gaps
    }
    expect(fn).not.toHaveBeenCalled();
    vi.advanceTimersByTime(SLIDER_DEBOUNCE_MS);
    expect(fn).toHaveBeenCalledTimes(1);
    expect(fn).toHaveBeenCalledWith(49);
  });

  it('separate quiet periods each fire', () => {
    const fn = vi.fn();
    const d = debounce(fn, 150);
    d('a');
    vi.advanceTimersByTime(150);
    d('b');
    vi.advanceTimersByTime(150);
    expect(fn).toHaveBeenCalledTimes(2);
  });

  it('cancel drops the pending call', () => {
    const fn = vi.fn();
    const d = debounce(fn, 150);
    d(1);
    d.cancel();
    vi.advanceTimersByTime(1000);
    expect(fn).not.toHaveBeenCalled();
  });

  it('flush invokes immediately and only once', () => {
    const fn = vi.fn();
    const d = debounce(fn, 150);
    d(7);
    d.flush();
    expect(fn).toHaveBeenCalledWith(7);
    vi.advanceTimersByTime(1000);
    expect(fn).toHaveBeenCalledTimes(1);
    d.flush(); // nothing pending: no-op
    expect(fn).toHaveBeenCalledTimes(1);
  });
});
