/** Trailing-edge debounce: fires once the input has been quiet for `ms`. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms = 150,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, ms);
  };
}
