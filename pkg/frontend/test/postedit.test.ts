import { describe, expect, it } from "vitest";

import { PostEditModel } from "../src/postedit.js";

describe("PostEditModel", () => {
  it("starts identical to the hypothesis", () => {
    const model = new PostEditModel("the cat sat");
    expect(model.text).toBe("the cat sat");
    expect(model.identicalToHypothesis).toBe(true);
  });

  it("tracks edits", () => {
    const model = new PostEditModel("the cat sat");
    model.setText("the cat sat down");
    expect(model.text).toBe("the cat sat down");
    expect(model.identicalToHypothesis).toBe(false);
  });

  it("reset restores the original verbatim", () => {
    const model = new PostEditModel("the cat sat");
    model.setText("something else entirely");
    model.reset();
    expect(model.text).toBe("the cat sat");
    expect(model.identicalToHypothesis).toBe(true);
  });

  it("editing back to the original counts as identical", () => {
    const model = new PostEditModel("the cat sat");
    model.setText("the cat sa");
    model.setText("the cat sat");
    expect(model.identicalToHypothesis).toBe(true);
  });
});
