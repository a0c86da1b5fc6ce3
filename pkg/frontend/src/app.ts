/**
 * DOM bootstrap: builds the gallery from the model card, wires the upload
 * form, sliders, strength controls, compare toggle, history strip, and the
 * enhancement sweep button. Pure glue; the logic lives in the other modules.
 */

import { ApiClient, ApiError, ModelCard } from "./api.js";
import { Mixer, SWEEP_STRENGTHS } from "./mixer.js";
import { SessionState, Snapshot } from "./session.js";
import {
  archetypeCard,
  decompositionPanel,
  fieldError,
  historyEntry,
  retryBanner,
} from "./render.js";
import { unitWeights } from "./simplex.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

function show(el: HTMLElement, visible: boolean): void {
  el.style.display = visible ? "" : "none";
}

export async function main(): Promise<void> {
  const api = new ApiClient();
  const gallery = byId<HTMLDivElement>("gallery");
  const sliderBox = byId<HTMLDivElement>("sliders");
  const original = byId<HTMLImageElement>("original");
  const preview = byId<HTMLImageElement>("preview");
  const comparePane = byId<HTMLImageElement>("compare");
  const uploadInput = byId<HTMLInputElement>("upload");
  const strengthInput = byId<HTMLInputElement>("strength");
  const deltaInput = byId<HTMLInputElement>("delta");
  const expertToggle = byId<HTMLInputElement>("expert");
  const compareToggle = byId<HTMLInputElement>("compare-toggle");
  const decompBox = byId<HTMLDivElement>("decomposition");
  const historyBox = byId<HTMLDivElement>("history");
  const sweepBox = byId<HTMLDivElement>("sweep");
  const sweepButton = byId<HTMLButtonElement>("run-sweep");
  const sweepTarget = byId<HTMLSelectElement>("sweep-target");
  const errorBox = byId<HTMLDivElement>("errors");

  let model: ModelCard;
  try {
    model = await api.getModel();
  } catch (error) {
    errorBox.innerHTML = retryBanner(describe(error));
    errorBox.querySelector("[data-action=retry]")?.addEventListener("click", () => {
      errorBox.innerHTML = "";
      void main();
    });
    return;
  }

  const session = new SessionState(model.k);
  const urls: string[] = [];
  const trackUrl = (blob: Blob): string => {
    const url = URL.createObjectURL(blob);
    urls.push(url);
    return url;
  };

  const mixer = new Mixer(api, session, {
    onPreview: (pair, snapshot) => {
      preview.src = trackUrl(pair.blended);
      show(comparePane, pair.chained !== null);
      if (pair.chained !== null) comparePane.src = trackUrl(pair.chained);
      appendHistory(snapshot);
    },
    onOriginal: () => {
      if (uploadedUrl !== null) preview.src = uploadedUrl;
      show(comparePane, false);
    },
    onError: (error) => {
      errorBox.innerHTML = retryBanner(describe(error));
      errorBox
        .querySelector("[data-action=retry]")
        ?.addEventListener("click", () => {
          errorBox.innerHTML = "";
          mixer.queueRender();
        });
    },
  });

  // ---- gallery ----------------------------------------------------------
  gallery.innerHTML = model.archetypes
    .map((card) => archetypeCard(card, api.textureUrl(card.index)))
    .join("");
  gallery.querySelectorAll<HTMLElement>(".archetype-card").forEach((figure) => {
    figure.addEventListener("click", () => {
      // pin this archetype: all slider mass onto it
      const index = Number(figure.dataset.index);
      mixer.loadWeights(unitWeights(model.k, index));
      syncSliders();
    });
  });
  gallery.querySelectorAll("img").forEach((img) => {
    img.addEventListener("error", () => {
      const figure = img.closest(".archetype-card");
      if (!figure) return;
      figure.insertAdjacentHTML("beforeend", retryBanner("texture failed to load"));
      figure.querySelector("[data-action=retry]")?.addEventListener("click", () => {
        figure.querySelector(".retry-banner")?.remove();
        img.src = `${img.src.split("&retry=")[0]}&retry=${Date.now()}`;
      });
    });
  });

  // ---- sliders ----------------------------------------------------------
  const sliders: HTMLInputElement[] = [];
  for (let i = 0; i < model.k; i++) {
    const row = document.createElement("label");
    row.className = "slider-row";
    row.textContent = `archetype ${i} `;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.001";
    input.value = String(session.weights[i]);
    input.addEventListener("input", () => mixer.moveSlider(i, Number(input.value)));
    input.addEventListener("change", () => {
      mixer.releaseSlider();
      syncSliders();
    });
    row.appendChild(input);
    sliderBox.appendChild(row);
    sliders.push(input);
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = `archetype ${i}`;
    sweepTarget.appendChild(option);
  }

  function syncSliders(): void {
    session.weights.forEach((w, i) => {
      const slider = sliders[i];
      if (slider) slider.value = String(w);
    });
  }

  // ---- strength / expert / compare --------------------------------------
  show(deltaInput.parentElement ?? deltaInput, false);
  strengthInput.value = String(session.gamma);
  strengthInput.addEventListener("input", () => {
    mixer.setStrength(Number(strengthInput.value));
    if (!session.expertMode) deltaInput.value = strengthInput.value;
  });
  expertToggle.addEventListener("change", () => {
    session.setExpertMode(expertToggle.checked);
    show(deltaInput.parentElement ?? deltaInput, expertToggle.checked);
    deltaInput.value = String(session.delta);
  });
  deltaInput.addEventListener("input", () => mixer.setDelta(Number(deltaInput.value)));
  compareToggle.addEventListener("change", () => {
    mixer.setBaselineCompare(compareToggle.checked);
  });

  // ---- upload + decomposition -------------------------------------------
  let uploadedUrl: string | null = null;
  uploadInput.addEventListener("change", async () => {
    const file = uploadInput.files?.[0];
    if (!file) return;
    decompBox.innerHTML = "";
    if (uploadedUrl !== null) URL.revokeObjectURL(uploadedUrl);
    uploadedUrl = URL.createObjectURL(file);
    original.src = uploadedUrl;
    preview.src = uploadedUrl;
    mixer.setContent(file);
    try {
      const result = await api.decompose(file);
      decompBox.innerHTML = decompositionPanel(result);
      decompBox
        .querySelector("[data-action=load-weights]")
        ?.addEventListener("click", () => {
          mixer.loadWeights(result.weights);
          syncSliders();
        });
    } catch (error) {
      if (error instanceof ApiError && error.field !== null) {
        decompBox.innerHTML = fieldError(error.field, error.message);
      } else {
        decompBox.innerHTML = fieldError("image", describe(error));
      }
    }
  });

  // ---- history -----------------------------------------------------------
  function appendHistory(snapshot: Snapshot): void {
    const position = session.history.length - 1;
    historyBox.insertAdjacentHTML(
      "afterbegin",
      historyEntry(snapshot, trackUrl(snapshot.thumbnail), position),
    );
    historyBox
      .querySelector(`[data-position="${position}"]`)
      ?.addEventListener("click", () => {
        session.loadSnapshot(snapshot);
        syncSliders();
        strengthInput.value = String(session.gamma);
        deltaInput.value = String(session.delta);
        expertToggle.checked = session.expertMode;
        compareToggle.checked = session.baseline;
        mixer.queueRender();
        mixer.releaseSlider();
      });
  }

  // ---- enhancement sweep --------------------------------------------------
  sweepButton.addEventListener("click", async () => {
    sweepButton.disabled = true;
    sweepBox.innerHTML = "";
    try {
      const frames = await mixer.runEnhanceSweep(Number(sweepTarget.value));
      sweepBox.innerHTML = frames
        .map(
          (blob, i) =>
            `<figure class="sweep-frame"><img src="${trackUrl(blob)}" alt="sweep ${i}">` +
            `<figcaption>strength ${SWEEP_STRENGTHS[i]?.toFixed(2)}</figcaption></figure>`,
        )
        .join("");
    } catch (error) {
      errorBox.innerHTML = retryBanner(describe(error));
    } finally {
      sweepButton.disabled = false;
    }
  });

  window.addEventListener("beforeunload", () => {
    mixer.dispose();
    urls.forEach((url) => URL.revokeObjectURL(url));
  });
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.field !== null ? `${error.field}: ${error.message}` : error.message;
  }
  return error instanceof Error ? error.message : String(error);
}

if (typeof document !== "undefined" && document.getElementById("gallery") !== null) {
  void main();
}
