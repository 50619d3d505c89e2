export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export const SLIDER_DEBOUNCE_MS = 150;

/**
 * Trailing-edge debounce: the wrapped function runs once, with the latest
 * arguments, after `waitMs` of quiet.  Guarantees at most one pending
 * invocation, which is what keeps slider drags down to a single in-flight
 * sweep request.
 */
export function debounce<A extends unknown[]>(fn: (...args: A) => void, waitMs: number): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pendingArgs: A | null = null;

  const wrapped = (...args: A): void => {
    pendingArgs = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const call = pendingArgs!;
      pendingArgs = null;
      fn(...call);
    }, waitMs);
  };

  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pendingArgs = null;
  };

  wrapped.flush = () => {
    if (timer === null) return;
    clearTimeout(timer);
    timer = null;
    const call = pendingArgs!;
    pendingArgs = null;
    fn(...call);
  };

  return wrapped;
}
