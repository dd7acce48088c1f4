/**
 * Browser bootstrap: binds the controller to the DOM.
 *
 * The service origin is configurable at load time via the ?service= query
 * parameter (default http://127.0.0.1:8080); the page itself is plain static
 * files and performs no other I/O.
 */

import { AppController } from "./controller.js";

function serviceOrigin(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  return (fromQuery ?? "http://127.0.0.1:8080").replace(/\/$/, "");
}

function num(value: string | undefined | null, fallback: number): number {
  const parsed = Number(value);
  return Number.isFinite(parsed) ? parsed : fallback;
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  const controller = new AppController({
    origin: serviceOrigin(),
    onRender: (html) => {
      root.innerHTML = html;
    },
  });

  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const action = target.dataset.action;
    if (!action) {
      return;
    }
    ev.preventDefault();
    switch (action) {
      case "add": {
        const form = document.getElementById("add-event") as HTMLFormElement;
        const code = (form.elements.namedItem("code") as HTMLInputElement).value;
        const age = (form.elements.namedItem("age") as HTMLInputElement).value;
        controller.addEvent(code, Number(age));
        break;
      }
      case "remove":
        controller.removeEvent(Number(target.dataset.index));
        break;
      case "generate": {
        const n = (document.getElementById("n-samples") as HTMLInputElement)?.value;
        const maxAge = (document.getElementById("max-age") as HTMLInputElement)?.value;
        controller.setSamples(num(n, controller.state.params.n_samples));
        controller.setMaxAge(num(maxAge, controller.state.params.max_age_years));
        void controller.generate();
        break;
      }
      case "replay":
        void controller.replay();
        break;
      case "reroll":
        void controller.reroll();
        break;
      case "risk": {
        const form = document.getElementById("risk-form") as HTMLFormElement;
        const targets = (form.elements.namedItem("targets") as HTMLInputElement).value;
        const horizon = (form.elements.namedItem("horizon") as HTMLInputElement).value;
        void controller.exploreRisk(targets.split(","), Number(horizon));
        break;
      }
      case "dismiss":
        controller.dismissBanner();
        break;
    }
  });

  void controller.init();
}

bootstrap();
