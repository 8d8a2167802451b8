// At most one plan request is "current" per view; responses arriving for a
// superseded request id are discarded instead of racing onto the screen.

export class LatestGate {
  private counter = 0;

  issue(): number {
    this.counter += 1;
    return this.counter;
  }

  isCurrent(id: number): boolean {
    return id === this.counter;
  }
}
