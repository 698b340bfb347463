import { describe, expect, it } from "vitest";

import { ChannelMeta, UpdateMsg } from "../src/protocol.js";
import { formatValue, STALE_SCAN_PERIODS, TREND_CAPACITY, ViewModel } from "../src/state.js";

const META: ChannelMeta = {
  name: "temp1", direction: "readback", units: "K",
  gain: 1e-5, offset: 0, scan_period: 1.0,
};

function update(ch: string, val: number, ts: number): UpdateMsg {
  return { t: "update", ch, val, raw: Math.round(val * 1e5), ts, sev: "NONE" };
}

describe("view model", () => {
  it("applies updates and keeps the source timestamp", () => {
    const vm = new ViewModel();
    vm.applyUpdate(update("cryo:temp1", 4.5, 123456));
    const live = vm.live.get("cryo:temp1")!;
    expect(live.val).toBe(4.5);
    expect(live.ts).toBe(123456);
  });

  it("bounds the trend buffer at its capacity", () => {
    const vm = new ViewModel();
    vm.trackTrend("cryo:temp1");
    for (let i = 0; i < TREND_CAPACITY + 250; i++) {
      vm.applyUpdate(update("cryo:temp1", 4.5 + i * 1e-4, i * 1e9));
    }
    const trend = vm.trends.get("cryo:temp1")!;
    expect(trend.length).toBe(TREND_CAPACITY);
    // oldest entries dropped, newest kept
    expect(trend[trend.length - 1].ts).toBe((TREND_CAPACITY + 249) * 1e9);
    expect(trend[0].ts).toBe(250 * 1e9);
  });

  it("only buffers channels that are being trended", () => {
    const vm = new ViewModel();
    vm.applyUpdate(update("cryo:temp1", 4.5, 1));
    expect(vm.trends.has("cryo:temp1")).toBe(false);
  });

  it("flags values older than five scan periods as stale", () => {
    const vm = new ViewModel();
    vm.setChannels("cryo", [META]);
    vm.applyUpdate(update("cryo:temp1", 4.5, 1e9));
    expect(vm.isStale("cryo:temp1")).toBe(false);
    // something else in the system is much fresher
    vm.applyUpdate(update("cryo:other", 1.0, 1e9 + STALE_SCAN_PERIODS * 1e9 + 1));
    expect(vm.isStale("cryo:temp1")).toBe(true);
  });

  it("never marks on-demand channels stale", () => {
    const vm = new ViewModel();
    vm.setChannels("cryo", [{ ...META, name: "heater1", scan_period: null }]);
    vm.applyUpdate(update("cryo:heater1", 1.0, 1));
    vm.applyUpdate(update("cryo:x", 1.0, 1e15));
    expect(vm.isStale("cryo:heater1")).toBe(false);
  });

  it("tracks pending writes through to applied", () => {
    const vm = new ViewModel();
    vm.beginWrite("cryo:heater1", 2.4999);
    expect(vm.pendingWrites.get("cryo:heater1")!.state).toBe("pending");
    vm.finishWrite("cryo:heater1", 2.5);
    const p = vm.pendingWrites.get("cryo:heater1")!;
    expect(p.state).toBe("applied");
    expect(p.applied).toBe(2.5);
  });

  it("lists channels of one database in sorted order", () => {
    const vm = new ViewModel();
    vm.setChannels("cryo", [{ ...META, name: "z" }, { ...META, name: "a" }]);
    vm.setChannels("linac", [{ ...META, name: "m" }]);
    expect(vm.channelsOf("cryo")).toEqual(["cryo:a", "cryo:z"]);
  });
});

describe("value formatting", () => {
  it("attaches units and trims zeros", () => {
    expect(formatValue(4.5, "K")).toBe("4.5 K");
    expect(formatValue(0, "%")).toBe("0 %");
    expect(formatValue(85.0001, "%")).toBe("85.0001 %");
  });

  it("switches to exponent form for extremes", () => {
    expect(formatValue(1.5e-5, "")).toContain("e-5");
    expect(formatValue(3e9, "")).toContain("e+9");
  });
});
