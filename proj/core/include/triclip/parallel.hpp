// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRICLIP_PARALLEL_HPP_
#define TRICLIP_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace triclip {

// Worker count: TRICLIP_THREADS when set and positive, otherwise the
// hardware concurrency. Never less than one.
int worker_count();

// Runs body(i) for i in [0, n) over at most `workers` threads, using static
// contiguous chunks. Results must be written to per-index slots; the first
// exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int workers = 0);

// Like parallel_for but hands each worker its chunk [begin, end) and its
// worker index, so callers can keep per-worker accumulators and reduce them
// in worker order.
void parallel_chunks(
    std::size_t n,
    const std::function<void(int worker, std::size_t begin, std::size_t end)>&
        body,
    int workers = 0);

}  // namespace triclip

#endif  // TRICLIP_PARALLEL_HPP_
