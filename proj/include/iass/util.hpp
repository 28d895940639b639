/*
 * Copyright 2026 the iass authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <functional>

namespace iass {

/// Worker count for song-level parallelism: IASS_NUM_WORKERS when set,
/// otherwise the hardware concurrency, never more than `jobs`.
int num_workers(int64_t jobs);

/// Index-parallel loop; results must be written to preallocated slots so the
/// outcome is independent of scheduling. Exceptions from workers are
/// rethrown on the caller thread (first one wins).
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

/// Advisory exclusive lock on an output directory, released on destruction
/// or process death. Concurrent commands writing the same directory fail
/// fast instead of interleaving.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

}  // namespace iass
