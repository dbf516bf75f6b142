#pragma once

#include "vmem/estimate.hpp"
#include "vmem/factor.hpp"
#include "vmem/model.hpp"
#include "vmem/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmem {

/// Distance between two invertible ARMA(1,1) processes with AR coefficients
/// phi and MA coefficients -psi, measured between their AR(infinity)
/// representations. Throws DomainError when |psi| >= 1.
double arma_distance_generic(double phi_1, double psi_1, double phi_2, double psi_2);

/// MEM specialization: phi = alpha + beta, psi = beta, so the AR(infinity)
/// weights are alpha beta^(j-1).
double arma_distance(double alpha_i, double beta_i, double alpha_j, double beta_j);

double theta_distance(double theta_i, double theta_j);

/// Gram matrix of the derivatives of the AR(infinity) weights alpha beta^(j-1)
/// with respect to (alpha, beta); propagates estimation noise into distances.
Eigen::Matrix2d arma_embedding_gram(double alpha, double beta);

/// One agglomeration step. Leaves are nodes 0..n-1, merge k creates node n+k.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::vector<std::string> labels;
    std::vector<Merge> merges;
};

struct Partition {
    std::vector<std::string> labels;
    std::vector<int> groups;  ///< 1..k in order of first appearance

    int k() const;
    int group_of(const std::string& label) const;
};

/// Number-of-clusters rule. Automatic selection cuts the tree at the largest
/// gap between consecutive merge heights (the cut into n singletons is never
/// considered; ties go to fewer clusters). Merges at or below `floor` are
/// always performed, so a tree whose top merge is at or below the floor
/// yields one cluster.
struct Selection {
    bool automatic = true;
    int k = 0;
    double floor = 0.0;

    static Selection automatic_gap(double floor = 0.0) { return {true, 0, floor}; }
    static Selection fixed(int k) { return {false, k, 0.0}; }
};

struct ClusterResult {
    Dendrogram dendrogram;
    Partition partition;
};

/// Average-linkage agglomerative clustering of a symmetric, non-negative
/// distance matrix with zero diagonal.
ClusterResult hierarchical_cluster(const Matrix& distances, const std::vector<std::string>& labels,
                                   const Selection& selection = {});

/// Partition obtained by performing the first n - k merges.
Partition cut_tree(const Dendrogram& dendrogram, int k);

/// Chance-corrected agreement of two partitions of the same labels.
double adjusted_rand_index(const Partition& a, const Partition& b);

Matrix arma_distance_matrix(const std::vector<double>& alpha, const std::vector<double>& beta);
Matrix theta_distance_matrix(const std::vector<double>& theta);

struct ClusterOptions {
    FitOptions fit;
    /// Multiple of the estimation-noise distance used as the merge floor
    /// (0 disables it).
    double noise_floor_z = 2.0;
    std::optional<int> k1;  ///< fixed number of (alpha, beta) groups
    std::optional<int> k2;  ///< fixed number of loading groups
};

struct ClusteringReport {
    ModelSpec spec;
    std::optional<FitResult> scalar_fit;  ///< step 1 (vMEM-SeC only)
    Vector xi_star;                       ///< training rows, zero for vMEM
    std::vector<UnivariateFit> univariate;
    ClusterResult ab;
    std::optional<ClusterResult> theta;
    double ab_floor = 0.0;
    double theta_floor = 0.0;
    std::optional<double> ab_theta_ari;
};

/// Builds a clustered specification:
///  (1) scalar vMEM-SeC fit, (2) its common component xi*, (3) univariate
///  MEM-SeC fits per series with xi* as regressor, (4) clustering of
///  (alpha_i, beta_i) by ARMA distance, (5) clustering of theta_i.
/// For the vMEM variant only steps 3-4 run, with xi* = 0.
ClusteringReport clustering_pipeline(const VolatilityPanel& panel, const PcFactor& factor, Variant variant,
                                     const ClusterOptions& options = {});

}  // namespace vmem
