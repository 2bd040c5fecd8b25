// Copyright 2026 The wvalab Authors
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

#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "wvalab/meter.hpp"
#include "wvalab/qsys.hpp"

namespace wvalab {

using MeterState = std::variant<GaussianMeter, GridMeter, FockMeter>;

enum class Generator { MomentumKick, PhotonNumberPhase };

struct CouplingConfig {
    double g = 0.0;
    Generator generator = Generator::MomentumKick;
    Observable A = Observable::pauli_z();
};

struct EvolveOptions {
    int grid_points = 4096;
    /// Half-width of the grid built for an analytic Gaussian meter; 0 picks 8(σ + max|a g|).
    double span = 0.0;
};

enum class MeterKind { Grid, Fock };

/// One eigenvalue sector: the projected system vector and the meter moved by a·g.
struct JointBranch {
    double eigenvalue;
    CVector system;
    CVector meter;
};

struct JointComponent {
    double weight;
    std::vector<JointBranch> branches;
};

struct JointState {
    MeterKind kind = MeterKind::Grid;
    double q0 = 0.0;
    double dq = 1.0;
    double tail_mass = 0.0;
    Generator generator = Generator::MomentumKick;
    std::vector<JointComponent> components;

    /// Integration weight of one meter sample: dq on a grid, 1 in the number basis.
    double measure() const {
        return kind == MeterKind::Grid ? dq : 1.0;
    }
    double norm() const;
    Eigen::Index system_dim() const;
};

JointState evolve_joint(const SystemState &pre, const MeterState &meter, const CouplingConfig &cfg,
                        const EvolveOptions &options = {});

/// Success probabilities below 1e-24 are reported as exactly 0 with `empty` set.
struct PostSelectedMeter {
    std::optional<MeterState> success_meter;
    double p_f = 0.0;
    /// Present for qubit systems, where the failure outcome is a single state.
    std::optional<MeterState> failure_meter;
    double p_r = 1.0;
    bool empty = false;
};

PostSelectedMeter postselect(const JointState &joint, const SystemState &post);

/// Unnormalized meter vector <bra|Psi> and its g-derivative for one ensemble component.
struct ArmVectors {
    double weight;
    CVector v;
    CVector dv;
};

std::vector<ArmVectors> arm_vectors(const JointState &joint, const CVector &bra);

struct Shifts {
    double q;
    double p;
};

Shifts aav_shifts(cplx weak_value, double g, double sigma);
Shifts exact_shifts(cplx weak_value, double g, double sigma);
Shifts orthogonal_shifts(cplx orthogonal_weak_value, double g, double sigma);

enum class RegimeLabel { Strong, StandardWVA, InverseWVA };

struct RegimeReport {
    RegimeLabel label;
    double coupling_ratio;   // g/σ
    double amplified_ratio;  // g|w|/σ
};

const char *to_string(RegimeLabel label);

RegimeReport classify_regime(double g, double sigma, cplx weak_value);

double trapped_ion_shift(double gamma, double theta, double gamma0_t);

double aav_condition_margin(const SystemState &pre, const SystemState &post, const Observable &A, double g,
                            double sigma, int n_max);

}  // namespace wvalab
