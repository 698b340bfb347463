import { describe, expect, it } from "vitest";

import { parseServerMsg, validateOutbound } from "../src/protocol.js";

describe("outbound schema guard", () => {
  it("accepts every request shape the console uses", () => {
    const good = [
      { t: "hello", id: 1, ver: 1 },
      { t: "list", id: 2, db: "cryo" },
      { t: "read", id: 3, ch: "cryo:temp1" },
      { t: "write", id: 4, ch: "cryo:heater1", val: 12.5 },
      { t: "sub", id: 5, ch: "linac:res01" },
      { t: "unsub", id: 6, ch: "linac:res01" },
      { t: "camac", id: 7, crate: 1, station: 1, sub: 0, fn: 0 },
      { t: "camac", id: 8, crate: 19, station: 2, sub: 3, fn: 16, data: 4096 },
    ];
    for (const msg of good) expect(() => validateOutbound(msg)).not.toThrow();
  });

  it("rejects unknown types", () => {
    expect(() => validateOutbound({ t: "drop_table", id: 1 })).toThrow();
    expect(() => validateOutbound({ id: 1 })).toThrow();
  });

  it("rejects missing or malformed fields", () => {
    expect(() => validateOutbound({ t: "read", id: 1 })).toThrow();
    expect(() => validateOutbound({ t: "read", id: 1, ch: "no-colon" })).toThrow();
    expect(() => validateOutbound({ t: "write", id: 1, ch: "a:b", val: NaN })).toThrow();
    expect(() => validateOutbound({ t: "write", id: 1, ch: "a:b", val: "9" })).toThrow();
    expect(() => validateOutbound({ t: "hello", id: 1, ver: 2 })).toThrow();
    expect(() => validateOutbound({ t: "sub", id: -1, ch: "a:b" })).toThrow();
  });

  it("rejects extra keys outside the schema", () => {
    expect(() => validateOutbound({ t: "read", id: 1, ch: "a:b", evil: true })).toThrow();
    expect(() =>
      validateOutbound({ t: "camac", id: 1, crate: 1, station: 1, sub: 0, fn: 0, lam: 1 }),
    ).toThrow();
  });

  it("bounds camac address fields", () => {
    expect(() =>
      validateOutbound({ t: "camac", id: 1, crate: 63, station: 1, sub: 0, fn: 0 }),
    ).toThrow();
    expect(() =>
      validateOutbound({ t: "camac", id: 1, crate: 1, station: 24, sub: 0, fn: 0 }),
    ).toThrow();
  });
});

describe("server message parsing", () => {
  it("parses objects with a type tag", () => {
    expect(parseServerMsg('{"t":"update","ch":"a:b","val":1}').t).toBe("update");
  });

  it("rejects non-objects and missing tags", () => {
    expect(() => parseServerMsg("[1,2]")).toThrow();
    expect(() => parseServerMsg('{"x":1}')).toThrow();
    expect(() => parseServerMsg("oops")).toThrow();
  });
});
