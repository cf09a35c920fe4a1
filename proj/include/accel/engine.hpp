/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

/*!
 * \file engine.hpp
 * \brief Transaction level simulator of the fetch / load / compute / store machine.
 *
 * Time advances from event to event. Fetch dispatches one instruction per
 * cycle to the module selected by opcode and memory kind. Each module runs
 * its instructions in order, popping dependency tokens before it starts and
 * pushing them when it completes. Memory instructions are split into row
 * requests that go through the VME: a tag pool bounds the requests in flight,
 * DRAM answers after a constant latency and a single bus moves one pulse per
 * cycle for reads and writes alike.
 */
#ifndef ACCEL_ENGINE_HPP_
#define ACCEL_ENGINE_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "accel/codegen.hpp"
#include "accel/config.hpp"
#include "accel/isa.hpp"

namespace accel {

enum class SimMode : std::uint8_t { kTiming, kFunctional };

enum class ActivityKind : std::uint8_t {
  kGemm,
  kAlu,
  kLoadInp,
  kLoadWgt,
  kLoadAcc,
  kLoadUop,
  kStore,
  kIdle,
  kBlocked,
};

std::string_view to_string(ActivityKind kind);

struct Interval {
  std::int64_t start = 0;
  std::int64_t end = 0;  // exclusive
  Module process = Module::kLoad;
  ActivityKind kind = ActivityKind::kIdle;
  std::int64_t insn = -1;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SimOptions {
  SimMode mode = SimMode::kTiming;
  /*! \brief VME completion reordering seed; 0 keeps issue order. */
  std::uint64_t seed = 0;
  int token_queue_depth = 256;
  int command_queue_depth = 512;
  /*! \brief Record per-instruction scratchpad accesses for hazard_log. */
  bool trace_accesses = false;
  /*! \brief DRAM byte address of instruction 0. */
  std::uint64_t ins_base = 0x1000;
  /*! \brief Abort (as a deadlock) past this many cycles; 0 disables. */
  std::int64_t max_cycles = 0;
};

/*! \brief Byte-granular pulse split of one bus transfer. */
struct PulsePlan {
  std::int64_t pulses = 0;
  std::uint64_t first_mask = 0;  // byte enables of the first pulse, bit i = byte i
  std::uint64_t last_mask = 0;
};

PulsePlan plan_pulses(std::uint64_t addr, std::uint64_t bytes, int bus_bits);

struct VmeRequest {
  MemKind kind = MemKind::kInp;
  bool write = false;
  std::uint64_t addr = 0;
  std::uint64_t bytes = 0;
  std::uint32_t sram_dst = 0;
  int owner = 0;
};

/*!
 * \brief Memory engine with a tag table. Tags are allocated on issue and
 *  released on completion.
 */
class Vme {
 public:
  Vme(const AccelConfig& cfg, std::uint64_t seed);

  bool has_free_tag() const { return !free_tags_.empty(); }
  int inflight() const { return static_cast<int>(table_.size()); }
  int max_inflight() const { return max_inflight_; }

  /*! \brief Returns the tag. Requires has_free_tag(). */
  int issue(const VmeRequest& req, std::int64_t now);

  /*! \brief Start bus transfers that can start at `now`. */
  bool schedule(std::int64_t now);

  struct Completion {
    int tag;
    VmeRequest req;
    std::int64_t time;
  };
  /*! \brief Retire every request finished by `now`, releasing its tag. */
  std::vector<Completion> complete(std::int64_t now);

  /*! \brief Earliest future time at which schedule/complete can make progress. */
  std::int64_t next_event(std::int64_t now) const;

  /*! \brief Metadata of an in-flight tag. Throws on an unknown tag. */
  const VmeRequest& lookup(int tag) const;

  std::int64_t read_pulses() const { return read_pulses_; }
  std::int64_t write_pulses() const { return write_pulses_; }
  std::int64_t requests() const { return requests_; }
  /*! \brief Largest number of whole uops carried by one pulse. */
  int max_uops_per_pulse() const { return max_uops_per_pulse_; }

 private:
  struct Entry {
    VmeRequest req;
    std::uint64_t seq = 0;
    std::int64_t ready = 0;  // earliest bus start
    std::int64_t done = -1;  // set once on the bus
    std::int64_t pulses = 0;
  };

  int bus_bytes_;
  int latency_;
  int uop_bytes_;
  int capacity_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<int> free_tags_;
  std::map<int, Entry> table_;
  std::uint64_t next_seq_ = 0;
  std::int64_t bus_free_ = 0;
  int max_inflight_ = 0;
  std::int64_t read_pulses_ = 0;
  std::int64_t write_pulses_ = 0;
  std::int64_t requests_ = 0;
  int max_uops_per_pulse_ = 0;
};

/*! \brief Scratchpad entries touched by one instruction, per memory kind. */
struct AccessRecord {
  std::size_t insn = 0;
  Module module = Module::kLoad;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::vector<std::pair<MemKind, std::vector<std::uint32_t>>> reads;
  std::vector<std::pair<MemKind, std::vector<std::uint32_t>>> writes;
};

struct Hazard {
  std::string region;     // e.g. "INP[12]"
  std::string violation;  // RAW / WAR / WAW with the two instructions
  std::size_t first = 0;  // earlier in program order
  std::size_t second = 0;
};

struct Scratchpads {
  std::vector<std::int32_t> inp;
  std::vector<std::int32_t> wgt;
  std::vector<std::int32_t> acc;
  std::vector<std::int32_t> out;
  std::vector<Uop> uop;
};

struct InsnTiming {
  std::int64_t dispatch = -1;
  std::int64_t start = -1;
  std::int64_t end = -1;
};

struct SimReport {
  bool completed = false;
  std::int64_t total_cycles = 0;
  std::vector<Interval> intervals;
  DramBytes dram_bytes;
  std::array<int, kNumDepQueues> token_high_water{};
  std::optional<std::string> deadlock;
  std::vector<std::size_t> blocked;
  std::vector<InsnTiming> timing;
  std::vector<std::uint64_t> fetch_addresses;
  int vme_max_inflight = 0;
  int vme_max_uops_per_pulse = 0;
  std::int64_t vme_requests = 0;
  std::int64_t vme_read_pulses = 0;
  std::int64_t vme_write_pulses = 0;
  std::int64_t gemm_cycles = 0;
  std::int64_t alu_cycles = 0;
  std::vector<AccessRecord> accesses;
  // functional mode only
  Scratchpads scratch;
  DramImage dram;
};

/*!
 * \brief Simulate a stream. Deadlock is reported, not thrown. Functional mode
 *  reads and updates `dram`; it throws Error on out-of-range DRAM access.
 */
SimReport run(const InstructionStream& stream, const AccelConfig& cfg,
              const SimOptions& options = {}, DramImage dram = {});

/*! \brief Accesses that broke program order. Needs trace_accesses. */
std::vector<Hazard> hazard_log(const SimReport& report);

/*! \brief Instruction latency in cycles for compute instructions. */
std::int64_t compute_latency(const Instruction& insn, const AccelConfig& cfg);

std::string report_json(const SimReport& report);
/*! \brief cycle_start,cycle_end,process,kind rows. */
std::string intervals_csv(const SimReport& report);

}  // namespace accel

#endif  // ACCEL_ENGINE_HPP_
