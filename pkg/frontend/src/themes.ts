// One UI theme per attention state, keyed by the semantic visual-feedback
// id from the wire. Themes change only when a directive message arrives,
// never on raw state updates.

import type { VisualFeedback } from "./protocol.js";

export interface UiTheme {
  id: VisualFeedback;
  rootClass: string;
  accent: string;
  /** hide navigation chrome for immersion */
  chromeHidden: boolean;
  /** soften palette and collapse non-essential panels */
  softened: boolean;
  /** emphasize key points in assistant messages */
  highlightKeyPoints: boolean;
  /** pulse attention-catching cues */
  animatedCues: boolean;
  /** show an explicit pause/review control */
  pauseControl: boolean;
}

export const THEMES: Record<VisualFeedback, UiTheme> = {
  FocusMode: {
    id: "FocusMode",
    rootClass: "theme-focus",
    accent: "#2f6f4f",
    chromeHidden: true,
    softened: false,
    highlightKeyPoints: false,
    animatedCues: false,
    pauseControl: false,
  },
  Default: {
    id: "Default",
    rootClass: "theme-default",
    accent: "#3a6ea5",
    chromeHidden: false,
    softened: false,
    highlightKeyPoints: false,
    animatedCues: false,
    pauseControl: false,
  },
  HighlightCues: {
    id: "HighlightCues",
    rootClass: "theme-highlight",
    accent: "#b8860b",
    chromeHidden: false,
    softened: false,
    highlightKeyPoints: true,
    animatedCues: false,
    pauseControl: false,
  },
  SoftenedUI: {
    id: "SoftenedUI",
    rootClass: "theme-soft",
    accent: "#8a8fa3",
    chromeHidden: false,
    softened: true,
    highlightKeyPoints: false,
    animatedCues: false,
    pauseControl: true,
  },
  AnimatedCues: {
    id: "AnimatedCues",
    rootClass: "theme-animated",
    accent: "#c0392b",
    chromeHidden: false,
    softened: false,
    highlightKeyPoints: false,
    animatedCues: true,
    pauseControl: false,
  },
};

export function themeFor(visual: VisualFeedback): UiTheme {
  return THEMES[visual];
}
