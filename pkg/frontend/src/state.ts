/** Shared app state: the active design, its policy, and the live session. */

import type { DesignSummary, PolicyPayload, SessionView } from './types.js';

type Listener = () => void;

export class AppState {
  design: DesignSummary | null = null;
  policy: PolicyPayload | null = null;
  session: SessionView | null = null;
  private listeners: Listener[] = [];

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  setDesign(design: DesignSummary): void {
    if (this.design?.design_id !== design.design_id) {
      this.policy = null;
      this.session = null;
    }
    this.design = design;
    this.emit();
  }

  setPolicy(policy: PolicyPayload): void {
    this.policy = policy;
    this.emit();
  }

  setSession(session: SessionView | null): void {
    this.session = session;
    this.emit();
  }
}
